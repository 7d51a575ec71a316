# Analyses/evolution.py

import logging
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.integrate import solve_ivp

from config import (
    COUPLING_REFRESH,
    LAGUERRE_ORDER,
    MAX_LOG_STEP,
    RTOL,
    SAMPLE_RATIO,
)
from pipeline_spectral.errors import (
    DomainError,
    EvolutionError,
    NonIntegrableSingularityError,
    ZeroHeightError,
)
from pipeline_spectral.model.params import ModelParams
from pipeline_spectral.model.perturbation import PerturbationSpec, perturbation_eval
from pipeline_spectral.numerics.quadrature import gauss_laguerre_rule, trace_gaussian_integral
from pipeline_spectral.analyses.ou_spectrum import SpectrumTable, build_spectrum

logger = logging.getLogger(__name__)

COEFFICIENT_OVERFLOW = 1e300


# --------------------------------------------------
# 1. Coupling matrix M(t)
# --------------------------------------------------

class CouplingAssembler:
    """
    Evaluates M_ab(t) = int t^s h(sqrt(t) x, t) Tr Y_a Tr Y_b G(x, 0) dx.

    For h = (1+bt)[A r^p + B] e^{-r^2} the radial integral of each term is
    int r^m P_a P_b(r^2/4) e^{-(1/4+t) r^2} dr, and u = (1/4+t) r^2 turns
    it into a generalized Gauss-Laguerre integral exact for the polynomial
    P_a P_b. Rules are built once per pair of angular modes.
    """

    def __init__(self, table: SpectrumTable, pert: Optional[PerturbationSpec],
                 params: Optional[ModelParams] = None, order: int = LAGUERRE_ORDER):
        self.table = table
        self.pert = pert
        self.params = table.params if params is None else params
        self.order = order
        self.size = table.size
        self._blocks = []

        if pert is None or pert.is_trivial():
            return

        by_mode: Dict[int, List[int]] = {}
        for idx, el in enumerate(table.elements):
            by_mode.setdefault(el.j, []).append(idx)

        p = pert.singular_exponent(self.params)
        terms = []
        if pert.amplitude_A != 0.0:
            terms.append(("A", p))
        if pert.amplitude_B != 0.0:
            terms.append(("B", 0.0))

        modes = sorted(by_mode)
        for ia, ja in enumerate(modes):
            for jb in modes[ia:]:
                idx_a, idx_b = by_mode[ja], by_mode[jb]
                ea, eb = table.elements[idx_a[0]], table.elements[idx_b[0]]
                if ea.l != eb.l:
                    continue
                trace_product = ea.equator_trace * eb.equator_trace
                if trace_product == 0.0:
                    continue
                scale = trace_product / np.outer(
                    [table.elements[i].norm_const for i in idx_a],
                    [table.elements[i].norm_const for i in idx_b],
                )
                for name, extra in terms:
                    m = self.params.N - 1.0 - ea.alpha - eb.alpha + extra
                    if m <= -1.0:
                        raise NonIntegrableSingularityError(
                            f"Coupling integrand not integrable | j=({ja},{jb}) | power={m}"
                        )
                    rule = gauss_laguerre_rule(order, float((m - 1.0) / 2.0))
                    self._blocks.append((name, m, rule, idx_a, idx_b, scale, ja != jb))

    @property
    def is_trivial(self) -> bool:
        return not self._blocks

    def _poly_values(self, indices: Sequence[int], x: np.ndarray) -> np.ndarray:
        return np.array([self.table.elements[i].radial_poly(x) for i in indices])

    def __call__(self, t: float) -> np.ndarray:
        M = np.zeros((self.size, self.size))
        if self.is_trivial:
            return M
        if t <= 0.0:
            raise DomainError(f"Coupling requires t > 0, got t={t}")

        pert, params = self.pert, self.params
        c = 0.25 + t
        coef = {
            "A": pert.amplitude_A * t ** (pert.singular_exponent(params) / 2.0),
            "B": pert.amplitude_B,
        }
        prefactor = t ** params.s * (1.0 + pert.time_slope * t)

        for name, m, rule, idx_a, idx_b, scale, mirror in self._blocks:
            x = rule.nodes / (4.0 * c)
            pa = self._poly_values(idx_a, x)
            pb = self._poly_values(idx_b, x)
            radial = 0.5 * c ** (-(m + 1.0) / 2.0) * (pa * rule.weights) @ pb.T
            block = prefactor * coef[name] * scale * radial
            M[np.ix_(idx_a, idx_b)] += block
            if mirror:
                M[np.ix_(idx_b, idx_a)] += block.T
        return M


def _graded_coupling(table: SpectrumTable, pert: PerturbationSpec, t: float, params: ModelParams) -> np.ndarray:
    size = table.size
    M = np.zeros((size, size))
    singular = pert.singular_exponent(params) if pert.amplitude_A != 0.0 else 0.0
    for i in range(size):
        for j in range(i, size):
            ea, eb = table.elements[i], table.elements[j]
            if ea.l != eb.l:
                continue
            angular = ea.equator_trace * eb.equator_trace / (ea.norm_const * eb.norm_const)
            if angular == 0.0:
                continue

            def radial(r, ea=ea, eb=eb):
                h = perturbation_eval(pert, np.sqrt(t) * r, t, params)
                return t ** params.s * h * r ** (-ea.alpha - eb.alpha) * ea.radial_poly(r ** 2 / 4.0) * eb.radial_poly(r ** 2 / 4.0)

            M[i, j] = M[j, i] = trace_gaussian_integral(
                radial, params, singular_power=singular - ea.alpha - eb.alpha, angular_value=angular
            )
    return M


def coupling_matrix(
    table: SpectrumTable,
    pert: Optional[PerturbationSpec],
    t: float,
    params: Optional[ModelParams] = None,
    method: str = "laguerre",
    order: int = LAGUERRE_ORDER
) -> np.ndarray:
    """
    Symmetric coupling matrix M(t) on the table.

    method="laguerre" uses the exact Gauss-Laguerre reduction,
    method="graded" the composite trace quadrature.
    """
    params = table.params if params is None else params
    if pert is None or pert.is_trivial():
        return np.zeros((table.size, table.size))
    if t <= 0.0:
        raise DomainError(f"Coupling requires t > 0, got t={t}")
    if method == "laguerre":
        return CouplingAssembler(table, pert, params, order)(t)
    if method == "graded":
        return _graded_coupling(table, pert, t, params)
    raise DomainError(f"Unknown coupling method: {method}")


class CouplingProvider:
    """
    M(t) refreshed on a grid in log t of spacing `refresh` and linearly
    interpolated in between; refresh = 0 evaluates exactly at every call.
    """

    def __init__(self, assembler: CouplingAssembler, log_t_hi: float, log_t_lo: float, refresh: float):
        self.assembler = assembler
        self.refresh = refresh
        self.trivial = assembler.is_trivial
        self._grid = None
        self._values = None
        if self.trivial or refresh <= 0.0:
            return
        n = int(np.ceil((log_t_hi - log_t_lo) / refresh)) + 1
        self._grid = log_t_lo + refresh * np.arange(n + 1)
        self._values = np.array([assembler(float(np.exp(g))) for g in self._grid])

    def at_log(self, tau: float) -> np.ndarray:
        if self.trivial:
            return np.zeros((self.assembler.size, self.assembler.size))
        if self._grid is None:
            return self.assembler(float(np.exp(tau)))
        pos = (tau - self._grid[0]) / self.refresh
        k = int(np.clip(np.floor(pos), 0, self._grid.size - 2))
        w = pos - k
        return (1.0 - w) * self._values[k] + w * self._values[k + 1]


# --------------------------------------------------
# 2. States and traces
# --------------------------------------------------

@dataclass(frozen=True)
class SpectralState:
    t: float
    coeffs: np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.coeffs)):
            raise EvolutionError(f"Non-finite coefficients at t={self.t}")

    def to_dict(self) -> dict:
        return {"t": self.t, "coeffs": [float(c) for c in self.coeffs]}


def height(state: SpectralState) -> float:
    """H = sum c_a^2."""
    return float(np.dot(state.coeffs, state.coeffs))


def dirichlet(state: SpectralState, coupling: Optional[np.ndarray], gammas: Sequence[float]) -> float:
    """D with t D = sum gamma_a c_a^2 - c^T M c."""
    c = state.coeffs
    td = float(np.dot(np.asarray(gammas) * c, c))
    if coupling is not None:
        td -= float(c @ coupling @ c)
    return td / state.t


def frequency(state: SpectralState, coupling: Optional[np.ndarray], gammas: Sequence[float],
              params: Optional[ModelParams] = None) -> float:
    """N = t D / H; warns when N falls to the lower bound -(N+2-2s)/4."""
    H = height(state)
    if H == 0.0:
        raise ZeroHeightError(f"Frequency undefined for zero height at t={state.t}")
    value = state.t * dirichlet(state, coupling, gammas) / H
    if params is not None and not value > -params.ou_shift:
        logger.warning(f"Frequency lower bound violated | t={state.t:.6e} | N={value:.6f} | bound={-params.ou_shift:.6f}")
    return value


@dataclass
class FrequencyTrace:
    """Samples (t, H, D, N) in decreasing t."""
    t: np.ndarray
    H: np.ndarray
    D: np.ndarray
    N: np.ndarray
    gamma_limit: Optional[float] = None
    fit_window: Optional[Tuple[float, float]] = None
    lower_bound_violated: bool = False

    @property
    def n_samples(self) -> int:
        return int(self.t.size)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"t": self.t, "H": self.H, "D": self.D, "N": self.N})


@dataclass(frozen=True)
class EvolutionConfig:
    params: ModelParams
    table: SpectrumTable
    pert: Optional[PerturbationSpec]
    t_start: float
    t_end: float
    initial: np.ndarray
    rtol: float = RTOL
    max_log_step: float = MAX_LOG_STEP
    sample_ratio: float = SAMPLE_RATIO
    coupling_refresh: float = COUPLING_REFRESH

    def __post_init__(self):
        if not self.t_end > 0.0:
            raise DomainError(f"t_end must be positive, got t_end={self.t_end}")
        if not self.t_end < self.t_start:
            raise DomainError(f"t_end must be below t_start, got t_end={self.t_end}, t_start={self.t_start}")
        if not 1e-14 < self.rtol < 1e-3:
            raise DomainError(f"rtol must lie in (1e-14, 1e-3), got rtol={self.rtol}")
        if not self.sample_ratio > 1.0:
            raise DomainError(f"sample_ratio must exceed 1, got {self.sample_ratio}")
        if not self.max_log_step > 0.0:
            raise DomainError(f"max_log_step must be positive, got {self.max_log_step}")
        if np.asarray(self.initial).shape != (self.table.size,):
            raise DomainError(
                f"Initial data has shape {np.asarray(self.initial).shape}, table has {self.table.size} elements"
            )


@dataclass(frozen=True)
class EvolutionResult:
    """States and trace of a run; forcing[k] = M(t_k) c(t_k) for the beta integral."""
    states: Tuple[SpectralState, ...]
    trace: FrequencyTrace
    forcing: np.ndarray
    gammas: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([s.coeffs for s in self.states])


def sample_log_times(t_start: float, t_end: float, ratio: float) -> np.ndarray:
    """Geometric grid t_start, t_start/ratio, ... ending exactly at t_end."""
    n = int(np.floor(np.log(t_start / t_end) / np.log(ratio) + 1e-9))
    log_t = np.log(t_start) - np.log(ratio) * np.arange(n + 1)
    if log_t[-1] - np.log(t_end) > 1e-12:
        log_t = np.append(log_t, np.log(t_end))
    else:
        log_t[-1] = np.log(t_end)
    return log_t


def coefficients_from_mapping(table: SpectrumTable, mapping: Mapping[Tuple[int, int], float]) -> np.ndarray:
    """Coefficient vector from {(n, j): value}; missing elements are zero."""
    return np.array([float(mapping.get((e.n, e.j), 0.0)) for e in table.elements])


# --------------------------------------------------
# 3. Galerkin evolution
# --------------------------------------------------

def evolve(config: EvolutionConfig) -> EvolutionResult:
    """
    Integrate dc/dtau = Gamma c - M(e^tau) c, tau = log t, from t_start
    down to t_end and sample (t, H, D, N) on a geometric grid.

    Raises
    ------
    EvolutionError
        On integrator failure or coefficient overflow.
    """
    table, params = config.table, config.params
    gammas = table.gammas
    c0 = np.asarray(config.initial, dtype=float)

    tau_hi, tau_lo = np.log(config.t_start), np.log(config.t_end)
    assembler = CouplingAssembler(table, config.pert, params)
    provider = CouplingProvider(assembler, tau_hi, tau_lo, config.coupling_refresh)

    def rhs(tau, c):
        return gammas * c - provider.at_log(tau) @ c

    taus = sample_log_times(config.t_start, config.t_end, config.sample_ratio)
    atol = max(config.rtol * 1e-12 * float(np.linalg.norm(c0)), 1e-300)

    logger.info(
        f"Evolution | size={table.size} | t_start={config.t_start:.3e} | t_end={config.t_end:.3e} | "
        f"rtol={config.rtol:.1e} | perturbed={not provider.trivial}"
    )
    sol = solve_ivp(
        rhs, (tau_hi, tau_lo), c0, method="RK45", t_eval=taus,
        rtol=config.rtol, atol=atol, max_step=config.max_log_step,
    )
    if sol.status != 0:
        raise EvolutionError(f"Integrator failed | {sol.message}")
    coeffs = sol.y.T
    if not np.all(np.isfinite(coeffs)) or np.max(np.abs(coeffs)) > COEFFICIENT_OVERFLOW:
        raise EvolutionError("Coefficients exceed 1e300; rescale the initial data or shorten the window")

    times = np.exp(sol.t)
    states = []
    H = np.empty(times.size)
    D = np.empty(times.size)
    N = np.full(times.size, np.nan)
    forcing = np.empty_like(coeffs)
    for k, (tau, c) in enumerate(zip(sol.t, coeffs)):
        state = SpectralState(t=float(times[k]), coeffs=c)
        M = provider.at_log(tau)
        states.append(state)
        forcing[k] = M @ c
        H[k] = height(state)
        D[k] = dirichlet(state, M, gammas)
        if H[k] > 0.0:
            N[k] = times[k] * D[k] / H[k]

    finite = N[np.isfinite(N)]
    violated = bool(finite.size and np.any(finite <= -params.ou_shift))
    if violated:
        logger.warning(f"Frequency lower bound violated | min_N={finite.min():.6f} | bound={-params.ou_shift:.6f}")

    trace = FrequencyTrace(t=times, H=H, D=D, N=N, lower_bound_violated=violated)
    logger.info(
        f"Evolution done | n_samples={times.size} | n_rhs={sol.nfev} | "
        f"N_end={N[-1] if np.isfinite(N[-1]) else float('nan'):.6f}"
    )
    return EvolutionResult(states=tuple(states), trace=trace, forcing=forcing, gammas=gammas)


def truncation_spillover(
    modes,
    params: ModelParams,
    n_max: int,
    pert: Optional[PerturbationSpec],
    initial: Mapping[Tuple[int, int], float],
    t_start: float,
    t_end: float,
    extra: int = 2,
    **kwargs
) -> Tuple[float, float, float]:
    """
    N(t_end) with radial truncation n_max and n_max + extra.

    Returns (N_base, N_enriched, |difference|).
    """
    values = []
    for n in (n_max, n_max + extra):
        table = build_spectrum(modes, n, params)
        config = EvolutionConfig(params=params, table=table, pert=pert, t_start=t_start, t_end=t_end,
                                 initial=coefficients_from_mapping(table, initial), **kwargs)
        values.append(float(evolve(config).trace.N[-1]))

    diff = abs(values[1] - values[0])
    logger.info(f"Truncation spillover | n_max={n_max} | N_base={values[0]:.6f} | N_enriched={values[1]:.6f} | diff={diff:.3e}")
    return values[0], values[1], diff
