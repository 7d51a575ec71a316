# Analyses/inequalities.py

import logging
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.linalg import LinAlgError, eigh

from config import DEFAULT_SEED, RANDOM_FAMILY_SIZE, SLACK_TOLERANCE
from pipeline_spectral.errors import DomainError, SpectralSolverError
from pipeline_spectral.model.params import ModelParams
from pipeline_spectral.model.perturbation import PerturbationSpec
from pipeline_spectral.analyses.evolution import coupling_matrix
from pipeline_spectral.analyses.ou_spectrum import GaussianForms, SpectrumTable
from pipeline_spectral.analyses.spherical_spectrum import SectorMatrices, sphere_trace_inequality_check

logger = logging.getLogger(__name__)

SPHERE_POLY_DEGREE = 6
COUPLING_TIMES = np.logspace(-12.0, 0.0, 25)
COUPLING_CHECK_TIMES = np.logspace(-14.25, -0.25, 29)
COUPLING_UNIFORMITY_TOLERANCE = 1e-2
TRACE_HOLDOUT_TOLERANCE = 0.5
HOLDOUT_SEED_OFFSET = 1000


# --------------------------------------------------
# 1. Results
# --------------------------------------------------

@dataclass(frozen=True)
class InequalityResult:
    """
    Outcome of an inequality LHS <= RHS on a random family.

    min_relative_slack is min (RHS - LHS) / RHS; `estimate` carries the
    empirical constant for the ratio-type checks.
    """
    name: str
    n_samples: int
    min_relative_slack: float
    max_ratio: float
    tolerance: float
    estimate: Optional[float] = None

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.min_relative_slack) and self.min_relative_slack >= -self.tolerance)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "n_samples": self.n_samples,
            "min_relative_slack": self.min_relative_slack,
            "max_ratio": self.max_ratio,
            "tolerance": self.tolerance,
            "estimate": self.estimate,
            "passed": self.passed,
        }


def random_combinations(size: int, count: int = RANDOM_FAMILY_SIZE, seed: int = DEFAULT_SEED) -> np.ndarray:
    """
    Rows of coefficients of random finite combinations of basis elements.

    Each row keeps a random nonempty subset of the elements with standard
    normal weights.
    """
    if size < 1 or count < 1:
        raise DomainError(f"Random family needs size >= 1 and count >= 1, got size={size}, count={count}")
    rng = np.random.default_rng(seed)
    coeffs = rng.standard_normal((count, size))
    keep = rng.random((count, size)) < rng.uniform(0.2, 1.0, size=(count, 1))
    keep[np.arange(count), rng.integers(0, size, size=count)] = True
    return coeffs * keep


def _quadratic(coeffs: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    return np.einsum("ka,ab,kb->k", coeffs, matrix, coeffs)


def _compare(name: str, lhs: np.ndarray, rhs: np.ndarray, tolerance: float,
             estimate: Optional[float] = None) -> InequalityResult:
    if np.any(rhs <= 0.0):
        raise DomainError(f"{name}: right-hand side must be positive on the family")
    slack = (rhs - lhs) / rhs
    result = InequalityResult(name=name, n_samples=int(lhs.size), min_relative_slack=float(slack.min()),
                              max_ratio=float(np.max(lhs / rhs)), tolerance=tolerance, estimate=estimate)
    log = logger.info if result.passed else logger.warning
    log(f"Inequality | {name} | n={result.n_samples} | min_slack={result.min_relative_slack:.3e} | "
        f"max_ratio={result.max_ratio:.6f} | passed={result.passed}")
    return result


# --------------------------------------------------
# 2. Hardy-type inequalities in Gaussian space
# --------------------------------------------------

def hardy_extended_inequality(forms: GaussianForms, params: ModelParams, coeffs: np.ndarray,
                              tolerance: float = SLACK_TOLERANCE) -> InequalityResult:
    """
    int V^2/|z|^2 + int |z|^2 V^2 / (4 (N-2s)^2)
        <= 4/(N-2s)^2 int |grad V|^2 + (N+2-2s)/(N-2s)^2 int V^2,

    all integrals against y^{1-2s} G.
    """
    gap = (params.N - 2.0 * params.s) ** 2
    lhs = _quadratic(coeffs, forms.inverse_square + forms.second_moment / (4.0 * gap))
    rhs = _quadratic(coeffs, 4.0 / gap * forms.dirichlet + (params.N + 2.0 - 2.0 * params.s) / gap * forms.mass)
    return _compare("hardy_extended", lhs, rhs, tolerance)


def hardy_fractional_inequality(forms: GaussianForms, params: ModelParams, coeffs: np.ndarray,
                                tolerance: float = SLACK_TOLERANCE) -> InequalityResult:
    """
    kappa_s Lambda_{N,s} int |x|^{-2s} (Tr V)^2 G(., 0) + (1/16) int |z|^2 V^2
        <= int |grad V|^2 + (N+2-2s)/4 int V^2.
    """
    lhs = _quadratic(coeffs, params.hardy_threshold * forms.weighted_trace + forms.second_moment / 16.0)
    rhs = _quadratic(coeffs, forms.dirichlet + params.ou_shift * forms.mass)
    return _compare("hardy_fractional", lhs, rhs, tolerance)


def vsqrtg_inequality(forms: GaussianForms, params: ModelParams, coeffs: np.ndarray,
                      tolerance: float = SLACK_TOLERANCE) -> InequalityResult:
    """
    ||grad(V sqrt G)||^2 <= (N+2-2s)/2 int V^2 G + 4 int |grad V|^2 G.

    With grad(V sqrt G) = sqrt G (grad V - z V / 4) the left side is
    D - <V, z.grad V> / 2 + (1/16) int |z|^2 V^2 G.
    """
    radial = (forms.radial_derivative + forms.radial_derivative.T) / 2.0
    lhs = _quadratic(coeffs, forms.dirichlet - radial / 2.0 + forms.second_moment / 16.0)
    rhs = _quadratic(coeffs, 2.0 * params.ou_shift * forms.mass + 4.0 * forms.dirichlet)
    return _compare("vsqrtg", lhs, rhs, tolerance)


# --------------------------------------------------
# 3. Ratio-type bounds
# --------------------------------------------------

def _largest_generalized_eigenvalue(numerator: np.ndarray, denominator: np.ndarray) -> float:
    num = (numerator + numerator.T) / 2.0
    den = (denominator + denominator.T) / 2.0
    try:
        return float(eigh(num, den, eigvals_only=True)[-1])
    except LinAlgError as exc:
        raise SpectralSolverError(f"Generalized eigensolve failed | {exc}") from exc


def trace_ratio_sup(forms: GaussianForms, coeffs: np.ndarray, check_coeffs: np.ndarray,
                    tolerance: float = TRACE_HOLDOUT_TOLERANCE) -> InequalityResult:
    """
    Empirical trace constant K = sup int (Tr V)^2 G(., 0) / ||V||_H^2 over
    the family `coeffs`, checked on the independent family `check_coeffs`.

    The check fails when a held-out ratio exceeds K by more than the
    relative tolerance.
    """
    fit = _quadratic(coeffs, forms.trace) / _quadratic(coeffs, forms.energy)
    k_fit = float(np.max(fit))
    lhs = _quadratic(check_coeffs, forms.trace)
    rhs = max(k_fit, np.finfo(float).tiny) * _quadratic(check_coeffs, forms.energy)
    result = _compare("trace_ratio", lhs, rhs, tolerance, estimate=k_fit)
    k_span = _largest_generalized_eigenvalue(forms.trace, forms.energy)
    logger.info(f"Trace constant | K_fit={k_fit:.6f} | K_check={result.max_ratio * k_fit:.6f} | "
                f"K_span={k_span:.6f}")
    return result


def _coupling_ratios(table: SpectrumTable, forms: GaussianForms, pert: PerturbationSpec,
                     times: Sequence[float]) -> List:
    """Scaled coupling matrices with their largest ratio to ||.||_H^2 on the span, per time."""
    params = table.params
    magnitude = replace(pert, amplitude_A=abs(pert.amplitude_A), amplitude_B=abs(pert.amplitude_B),
                        time_slope=abs(pert.time_slope))
    per_time = []
    for t in times:
        scale = pert.C_g * (t ** params.s + t ** (pert.epsilon / 2.0))
        M = coupling_matrix(table, magnitude, float(t), params) / scale
        per_time.append((M, _largest_generalized_eigenvalue(M, forms.energy)))
    return per_time


def perturbation_coupling_bound(
    table: SpectrumTable,
    forms: GaussianForms,
    pert: PerturbationSpec,
    coeffs: np.ndarray,
    times: Sequence[float] = COUPLING_TIMES,
    check_times: Sequence[float] = COUPLING_CHECK_TIMES,
    tolerance: float = COUPLING_UNIFORMITY_TOLERANCE
) -> InequalityResult:
    """
    Empirical constant C' in

        int t^s |h(sqrt(t) x, t)| (Tr V)^2 G(., 0) <= C' C_g (t^s + t^{eps/2}) ||V||_H^2.

    C' is the largest generalized eigenvalue over the fitting times. It is
    then checked at the held-out times, interleaved with the fitting grid
    and extending below it, both on the whole span and on the random
    family. A constant that is not uniform as t -> 0 exceeds the fit there.
    """
    fitted = _coupling_ratios(table, forms, pert, times)
    c_prime = max(value for _, value in fitted)
    bound = max(c_prime, np.finfo(float).tiny)

    held_out = _coupling_ratios(table, forms, pert, check_times)
    span_sup = np.array([value for _, value in held_out])
    family = np.max([_quadratic(coeffs, M) for M, _ in held_out], axis=0)
    lhs = np.concatenate([span_sup, family])
    rhs = np.concatenate([np.full(span_sup.size, bound), bound * _quadratic(coeffs, forms.energy)])

    result = _compare("coupling_bound", lhs, rhs, tolerance, estimate=c_prime)
    logger.info(f"Coupling constant | C_prime={c_prime:.6f} | held_out_sup={float(span_sup.max()):.6f} | "
                f"n_fit={len(fitted)} | n_check={len(held_out)}")
    return result


# --------------------------------------------------
# 4. Sphere trace inequality on random profiles
# --------------------------------------------------

def sphere_trace_family(
    sector: SectorMatrices,
    params: ModelParams,
    count: int = RANDOM_FAMILY_SIZE,
    seed: int = DEFAULT_SEED,
    degree: int = SPHERE_POLY_DEGREE,
    tolerance: float = SLACK_TOLERANCE
) -> InequalityResult:
    """
    Sphere trace inequality for psi = f(phi) Y_l with f a random polynomial
    in cos(phi), interpolated on the sector mesh. For l >= 1 the constant
    term is dropped so f vanishes at the pole.
    """
    rng = np.random.default_rng(seed)
    first = 1 if sector.l >= 1 else 0
    powers = np.cos(sector.mesh)[:, None] ** np.arange(first, degree + 1)[None, :]

    lhs, rhs = np.empty(count), np.empty(count)
    for k in range(count):
        f = powers @ rng.standard_normal(powers.shape[1])
        lhs[k] = params.hardy_threshold * f[0] ** 2
        rhs[k] = sphere_trace_inequality_check(f, params, sector) + lhs[k]
    return _compare(f"sphere_trace_l{sector.l}", lhs, rhs, tolerance)


# --------------------------------------------------
# 5. Suite
# --------------------------------------------------

def run_inequality_suite(
    table: SpectrumTable,
    forms: GaussianForms,
    pert: Optional[PerturbationSpec] = None,
    seed: int = DEFAULT_SEED,
    count: int = RANDOM_FAMILY_SIZE,
    tolerance: float = SLACK_TOLERANCE
) -> List[InequalityResult]:
    """
    All Gaussian-space inequalities on one seeded family of basis
    combinations, the sphere trace inequality per harmonic sector, and the
    coupling bound when a perturbation is given. `tolerance` applies to the
    inequalities with explicit constants; the fitted constants carry their
    own held-out tolerances.
    """
    params = table.params
    coeffs = random_combinations(table.size, count, seed)
    check_coeffs = random_combinations(table.size, count, seed + HOLDOUT_SEED_OFFSET)
    results = [
        hardy_extended_inequality(forms, params, coeffs, tolerance),
        hardy_fractional_inequality(forms, params, coeffs, tolerance),
        vsqrtg_inequality(forms, params, coeffs, tolerance),
        trace_ratio_sup(forms, coeffs, check_coeffs),
    ]

    sectors: Dict[int, SectorMatrices] = {}
    for element in table.elements:
        if element.angular.sector is not None:
            sectors.setdefault(element.l, element.angular.sector)
    for l in sorted(sectors):
        results.append(sphere_trace_family(sectors[l], params, count, seed + l, tolerance=tolerance))

    if pert is not None and not pert.is_trivial():
        results.append(perturbation_coupling_bound(table, forms, pert, coeffs))

    failed = [r.name for r in results if not r.passed]
    logger.info(f"Inequality suite | n_checks={len(results)} | failed={failed or 'none'}")
    return results


def results_frame(results: Sequence[InequalityResult]) -> pd.DataFrame:
    return pd.DataFrame([r.to_dict() for r in results])
