# Analyses/blowup.py

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import CubicSpline

from config import BETA_SPREAD_TOLERANCE
from pipeline_spectral.errors import DomainError, InsufficientResolutionError
from pipeline_spectral.model.perturbation import PerturbationSpec
from pipeline_spectral.analyses.diagnostics import relative_spread
from pipeline_spectral.analyses.evolution import EvolutionResult
from pipeline_spectral.analyses.ou_spectrum import GaussianForms, SpectrumTable

logger = logging.getLogger(__name__)

MIN_INTEGRAL_SAMPLES = 3


# --------------------------------------------------
# 1. Beta coefficients
# --------------------------------------------------

@dataclass(frozen=True)
class BetaCoefficients:
    """Coordinates of the blow-up profile on the limit group."""
    Lambda: float
    Lambda_used: float
    group_index: int
    indices: Tuple[int, ...]
    values: np.ndarray
    terminal: np.ndarray
    integral: np.ndarray
    tail: np.ndarray

    def to_dict(self, table: SpectrumTable) -> dict:
        return {
            "Lambda": self.Lambda,
            "Lambda_used": self.Lambda_used,
            "group_index": self.group_index,
            "gamma": float(table.group_gammas[self.group_index]),
            "elements": [
                {"n": table.elements[i].n, "j": table.elements[i].j, "beta": float(v)}
                for i, v in zip(self.indices, self.values)
            ],
        }


def decay_exponent(pert: Optional[PerturbationSpec], s: float) -> float:
    """Power delta with (M c)_a t^{-gamma} = O(t^delta) as t -> 0."""
    if pert is None or pert.is_trivial():
        return float("inf")
    return pert.decay_rate(s)


def beta_coefficients(
    result: EvolutionResult,
    table: SpectrumTable,
    pert: Optional[PerturbationSpec],
    Lambda: float,
    group_index: int
) -> BetaCoefficients:
    """
    beta_a = Lambda^{-2 gamma_a} c_a(Lambda^2) + int_0^{Lambda^2} t^{-gamma_a - 1} (M c)_a dt
    for a in the limit group.

    Lambda^2 is snapped to the nearest sample. The integral runs by Simpson
    in log t down to t_end; the remainder on (0, t_end) follows the power
    law t^delta of the integrand and equals I(t_end) t_end / delta.
    """
    times = result.times
    target = Lambda ** 2
    if not times[-1] <= target <= times[0]:
        raise InsufficientResolutionError(
            f"Lambda^2={target:.3e} outside the sampled range [{times[-1]:.3e}, {times[0]:.3e}]"
        )
    k = int(np.argmin(np.abs(np.log(times) - np.log(target))))
    if times.size - k < MIN_INTEGRAL_SAMPLES:
        raise InsufficientResolutionError(
            f"Only {times.size - k} samples below Lambda^2={target:.3e}; extend t_end"
        )

    indices = table.groups[group_index]
    gam = result.gammas[list(indices)]
    coeffs = result.coefficients[:, list(indices)]
    forcing = result.forcing[:, list(indices)]

    t_k = times[k]
    terminal = t_k ** (-gam) * coeffs[k]

    tau = np.log(times[k:])[::-1]
    integrand = (times[k:, None] ** (-gam) * forcing[k:])[::-1]
    integral = simpson(integrand, x=tau, axis=0)

    delta = decay_exponent(pert, table.params.s)
    tail = integrand[0] / delta if np.isfinite(delta) else np.zeros_like(terminal)

    values = terminal + integral + tail
    logger.info(
        f"Beta | Lambda={Lambda:.4f} | Lambda_used={np.sqrt(t_k):.4f} | group={group_index} | "
        f"max_abs_beta={np.max(np.abs(values)):.6e} | max_abs_tail={np.max(np.abs(tail)):.3e}"
    )
    return BetaCoefficients(Lambda=float(Lambda), Lambda_used=float(np.sqrt(t_k)), group_index=group_index,
                            indices=tuple(indices), values=values, terminal=terminal,
                            integral=np.asarray(integral), tail=np.asarray(tail))


def beta_spread(betas: Sequence[BetaCoefficients], tolerance: float = BETA_SPREAD_TOLERANCE) -> float:
    """
    Largest relative spread of any beta component across a Lambda grid;
    warns above tolerance.
    """
    values = np.array([b.values for b in betas])
    scale = np.max(np.abs(values))
    spread = max((relative_spread(values[:, i]) if np.max(np.abs(values[:, i])) > 1e-12 * scale else 0.0)
                 for i in range(values.shape[1]))
    if spread > tolerance:
        logger.warning(f"Beta not Lambda-constant | spread={spread:.3e} | tolerance={tolerance:.1e}")
    return spread


# --------------------------------------------------
# 2. Blow-up profile
# --------------------------------------------------

class _RescaledCoefficients:
    """c_a(t) = t^{gamma_a} g_a(log t) with g_a a cubic spline of t^{-gamma_a} c_a."""

    def __init__(self, result: EvolutionResult):
        times = result.times
        self.t_min, self.t_max = times[-1], times[0]
        self.gammas = result.gammas
        tau = np.log(times)[::-1]
        g = (times[:, None] ** (-self.gammas) * result.coefficients)[::-1]
        self.spline = CubicSpline(tau, g, axis=0)

    def __call__(self, t: float) -> np.ndarray:
        if not self.t_min * (1 - 1e-12) <= t <= self.t_max * (1 + 1e-12):
            raise InsufficientResolutionError(
                f"t={t:.3e} outside the sampled range [{self.t_min:.3e}, {self.t_max:.3e}]"
            )
        return t ** self.gammas * self.spline(np.log(t))


def _profile_defects(result: EvolutionResult, beta: BetaCoefficients, table: SpectrumTable,
                     lam: float, tau_grid: Sequence[float]) -> np.ndarray:
    """Rows w(tau) = lam^{-2 gamma} c(lam^2 tau) - tau^gamma beta on the limit group."""
    gamma = float(table.group_gammas[beta.group_index])
    coefficients = _RescaledCoefficients(result)
    profile = np.zeros(table.size)
    profile[list(beta.indices)] = beta.values

    rows = []
    for tau in tau_grid:
        rescaled = lam ** (-2.0 * gamma) * coefficients(lam ** 2 * tau)
        rows.append(rescaled - tau ** gamma * profile)
    return np.array(rows)


def blowup_profile_error(
    result: EvolutionResult,
    table: SpectrumTable,
    beta: BetaCoefficients,
    forms: GaussianForms,
    lam: float,
    tau_grid: Sequence[float]
) -> Tuple[float, float]:
    """
    Distances between lam^{-2 gamma} V(., lam^2 tau) and tau^gamma sum beta Y.

    The basis is L-orthonormal, so err_L = sup_tau |w| (Euclidean) and
    err_H = (int w^T E w dtau)^{1/2} with E the H Gram matrix. Returns
    (err_H, err_L).
    """
    tau_grid = np.asarray(tau_grid, dtype=float)
    if tau_grid.size < 2 or np.any(np.diff(tau_grid) <= 0.0) or tau_grid[0] <= 0.0:
        raise DomainError("tau_grid must be positive, increasing, with at least 2 points")

    w = _profile_defects(result, beta, table, lam, tau_grid)
    err_L = float(np.max(np.linalg.norm(w, axis=1)))
    energy = np.einsum("ka,ab,kb->k", w, forms.energy, w)
    err_H = float(np.sqrt(max(np.trapezoid(energy, tau_grid), 0.0)))

    logger.info(f"Blow-up profile | lambda={lam:.4f} | err_L={err_L:.6e} | err_H={err_H:.6e}")
    return err_H, err_L


def trace_profile_error(
    result: EvolutionResult,
    table: SpectrumTable,
    beta: BetaCoefficients,
    forms: GaussianForms,
    lam: float,
    tau_grid: Sequence[float]
) -> float:
    """sup over tau of the L^2(R^N, G(., 0)) distance between traces."""
    w = _profile_defects(result, beta, table, lam, np.asarray(tau_grid, dtype=float))
    err = float(np.max(np.sqrt(np.maximum(np.einsum("ka,ab,kb->k", w, forms.trace, w), 0.0))))
    logger.info(f"Trace profile | lambda={lam:.4f} | err_trace={err:.6e}")
    return err
