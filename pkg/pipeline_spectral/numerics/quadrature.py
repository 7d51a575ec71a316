# Numerics/quadrature.py

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.linalg import LinAlgError, eigh_tridiagonal
from scipy.special import gamma

from config import (
    LAGUERRE_ORDER,
    TRACE_GRADING,
    TRACE_PANEL_ORDER,
    TRACE_PANELS,
    TRACE_TAIL_TOLERANCE,
)
from pipeline_spectral.errors import ConvergenceError, DomainError, NonIntegrableSingularityError
from pipeline_spectral.model.params import ModelParams, unit_sphere_area

logger = logging.getLogger(__name__)

TRACE_INITIAL_RADIUS = 8.0
TRACE_MAX_RADIUS = 60.0


# --------------------------------------------------
# 1. Rules
# --------------------------------------------------

@dataclass(frozen=True)
class QuadratureRule:
    """
    Gaussian rule for a fixed weight function.

    weight_kind is "jacobi" (weight (1-x)^alpha (1+x)^beta on (-1, 1)) or
    "laguerre" (weight t^alpha e^{-t} on (0, inf)); beta is unused for
    Laguerre rules.
    """
    nodes: np.ndarray
    weights: np.ndarray
    weight_kind: str
    order: int
    alpha: float
    beta: float = 0.0

    @property
    def support(self) -> Tuple[float, float]:
        return (-1.0, 1.0) if self.weight_kind == "jacobi" else (0.0, np.inf)

    def integrate(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        return float(np.dot(self.weights, f(self.nodes)))

    def moment(self, k: int) -> float:
        """Exact k-th monomial moment of the weight."""
        if self.weight_kind == "laguerre":
            return float(gamma(self.alpha + k + 1.0))

        # (alpha+beta+2+j) m_{j+1} = (beta-alpha) m_j + j m_{j-1}, from
        # integrating d/dx[(1-x)^{alpha+1} (1+x)^{beta+1} x^j] over (-1, 1)
        a, b = self.alpha, self.beta
        prev, curr = 0.0, jacobi_mass(a, b)
        for j in range(k):
            prev, curr = curr, ((b - a) * curr + j * prev) / (a + b + 2.0 + j)
        return curr

    def exactness_defect(self, max_degree: Optional[int] = None) -> float:
        """
        Largest defect over monomials x^k, k <= max_degree (default 2*order-1).

        Each defect is |Q(x^k) - m_k| scaled by Q(|x|^k).
        """
        max_degree = 2 * self.order - 1 if max_degree is None else max_degree
        worst = 0.0
        for k in range(max_degree + 1):
            values = self.nodes ** k
            approx = float(np.dot(self.weights, values))
            scale = float(np.dot(self.weights, np.abs(values)))
            worst = max(worst, abs(approx - self.moment(k)) / scale)
        return worst


def jacobi_mass(alpha: float, beta: float) -> float:
    """Integral of (1-x)^alpha (1+x)^beta over (-1, 1)."""
    return float(
        2.0 ** (alpha + beta + 1.0) * gamma(alpha + 1.0) * gamma(beta + 1.0) / gamma(alpha + beta + 2.0)
    )


def symtridiag_eigen(diagonal, offdiagonal) -> Tuple[np.ndarray, np.ndarray]:
    """
    Eigenvalues (ascending) and first eigenvector components of a symmetric
    tridiagonal matrix.
    """
    diagonal = np.asarray(diagonal, dtype=float)
    offdiagonal = np.asarray(offdiagonal, dtype=float)
    if diagonal.ndim != 1 or diagonal.size == 0:
        raise DomainError("Diagonal must be a nonempty 1-D sequence")
    if offdiagonal.size != diagonal.size - 1:
        raise DomainError(
            f"Off-diagonal length must be {diagonal.size - 1}, got {offdiagonal.size}"
        )
    if diagonal.size == 1:
        return diagonal.copy(), np.ones(1)

    try:
        eigenvalues, vectors = eigh_tridiagonal(diagonal, offdiagonal)
    except LinAlgError as exc:
        raise ConvergenceError(f"Tridiagonal eigensolver failed | order={diagonal.size} | {exc}") from exc

    order = np.argsort(eigenvalues)
    return eigenvalues[order], vectors[0, order]


def _christoffel_weights(nodes, diagonal, offdiagonal, mu0: float) -> np.ndarray:
    """
    w_i = 1 / sum_k p_k(x_i)^2 with p_k the orthonormal polynomials of the
    Jacobi matrix. Same weights as mu0 * v_0^2, with full relative accuracy
    for the tiny weights at the ends of the support.
    """
    p_prev = np.zeros_like(nodes)
    p_curr = np.full_like(nodes, 1.0 / np.sqrt(mu0))
    total = p_curr ** 2
    for k in range(nodes.size - 1):
        back = offdiagonal[k - 1] * p_prev if k > 0 else 0.0
        p_prev, p_curr = p_curr, ((nodes - diagonal[k]) * p_curr - back) / offdiagonal[k]
        total = total + p_curr ** 2
    return 1.0 / total


def _freeze(rule: QuadratureRule) -> QuadratureRule:
    rule.nodes.setflags(write=False)
    rule.weights.setflags(write=False)
    return rule


@lru_cache(maxsize=256)
def gauss_jacobi_rule(order: int, alpha: float, beta: float) -> QuadratureRule:
    """
    Golub-Welsch rule for (1-x)^alpha (1+x)^beta on (-1, 1).

    Parameters
    ----------
    order : int
        Number of nodes (>= 1).
    alpha, beta : float
        Exponents, both > -1.

    Returns
    -------
    QuadratureRule
    """
    if order < 1:
        raise DomainError(f"Rule order must be >= 1, got order={order}")
    if alpha <= -1.0 or beta <= -1.0:
        raise DomainError(f"Jacobi exponents must exceed -1, got alpha={alpha}, beta={beta}")

    ab = alpha + beta
    k = np.arange(1, order, dtype=float)

    diagonal = np.empty(order)
    diagonal[0] = (beta - alpha) / (ab + 2.0)
    diagonal[1:] = (beta ** 2 - alpha ** 2) / ((2.0 * k + ab) * (2.0 * k + ab + 2.0))

    off_sq = np.empty(order - 1)
    if order > 1:
        off_sq[0] = 4.0 * (1.0 + alpha) * (1.0 + beta) / ((2.0 + ab) ** 2 * (3.0 + ab))
        kk = k[1:]
        off_sq[1:] = (
            4.0 * kk * (kk + alpha) * (kk + beta) * (kk + ab)
            / ((2.0 * kk + ab) ** 2 * (2.0 * kk + ab + 1.0) * (2.0 * kk + ab - 1.0))
        )
    offdiagonal = np.sqrt(off_sq)

    mu0 = jacobi_mass(alpha, beta)
    nodes, _ = symtridiag_eigen(diagonal, offdiagonal)
    weights = _christoffel_weights(nodes, diagonal, offdiagonal, mu0)

    return _freeze(QuadratureRule(nodes=nodes, weights=weights, weight_kind="jacobi",
                                  order=order, alpha=float(alpha), beta=float(beta)))


@lru_cache(maxsize=256)
def gauss_laguerre_rule(order: int, a: float) -> QuadratureRule:
    """Golub-Welsch rule for t^a e^{-t} on (0, inf)."""
    if order < 1:
        raise DomainError(f"Rule order must be >= 1, got order={order}")
    if a <= -1.0:
        raise DomainError(f"Laguerre parameter must exceed -1, got a={a}")

    k = np.arange(order, dtype=float)
    diagonal = 2.0 * k + a + 1.0
    offdiagonal = np.sqrt(k[1:] * (k[1:] + a))

    mu0 = float(gamma(a + 1.0))
    nodes, _ = symtridiag_eigen(diagonal, offdiagonal)
    weights = _christoffel_weights(nodes, diagonal, offdiagonal, mu0)

    return _freeze(QuadratureRule(nodes=nodes, weights=weights, weight_kind="laguerre",
                                  order=order, alpha=float(a)))


# --------------------------------------------------
# 2. Gaussian-space integrals
# --------------------------------------------------

def halfspace_gaussian_integral(
    radial: Callable[[np.ndarray], np.ndarray],
    angular_value: float,
    params: ModelParams,
    order: int = LAGUERRE_ORDER,
    sigma: float = 0.0
) -> float:
    """
    Integral over the upper half-space of y^{1-2s} |z|^{-2 sigma} F(|z|^2/4) psi G dz.

    The angular factor psi is pre-integrated against theta_{N+1}^{1-2s} by the
    caller and passed as angular_value; radial receives t = |z|^2 / 4.
    """
    a = params.half_gap - sigma
    if a <= -1.0:
        raise DomainError(f"Effective Laguerre exponent must exceed -1, got a={a} (sigma={sigma})")

    rule = gauss_laguerre_rule(order, float(a))
    scale = 2.0 ** (params.N + 1.0 - 2.0 * params.s - 2.0 * sigma)
    return scale * rule.integrate(radial) * angular_value


def trace_gaussian_integral(
    radial: Callable[[np.ndarray], np.ndarray],
    params: ModelParams,
    singular_power: float = 0.0,
    order: int = TRACE_PANEL_ORDER,
    grading: float = TRACE_GRADING,
    panels: int = TRACE_PANELS,
    angular_value: Optional[float] = None
) -> float:
    """
    angular_value * int_0^inf radial(r) r^{N-1} e^{-r^2/4} dr.

    Composite Gauss-Legendre on a mesh graded toward r = 0; the first panel
    uses Gauss-Jacobi absorbing r^{singular_power + N - 1}. The cut-off R
    grows until the Gaussian tail estimate is below the tolerance.

    Parameters
    ----------
    radial : callable
        Radial profile, bounded by C r^{singular_power} near 0.
    singular_power : float
        Leading power of radial at the origin.
    angular_value : float, optional
        Angular factor; defaults to |S^{N-1}|.
    """
    N = params.N
    p = singular_power + N - 1.0
    if p <= -1.0:
        raise NonIntegrableSingularityError(
            f"r^{singular_power} r^(N-1) is not integrable at 0 (N={N}, effective power={p})"
        )
    if angular_value is None:
        angular_value = unit_sphere_area(N - 1)

    def integrand(r):
        return radial(r) * r ** (N - 1) * np.exp(-r ** 2 / 4.0)

    legendre_x, legendre_w = leggauss(order)
    first_rule = gauss_jacobi_rule(order, 0.0, float(p))

    R = TRACE_INITIAL_RADIUS
    while True:
        edges = R * (np.arange(panels + 1) / panels) ** grading

        # first panel: int_0^{r1} r^p h(r) dr with h = integrand / r^p
        r1 = edges[1]
        r_first = r1 * (1.0 + first_rule.nodes) / 2.0
        h_first = radial(r_first) * r_first ** (-singular_power) * np.exp(-r_first ** 2 / 4.0)
        total = (r1 / 2.0) ** (p + 1.0) * float(np.dot(first_rule.weights, h_first))

        lo, hi = edges[1:-1], edges[2:]
        half = (hi - lo)[:, None] / 2.0
        mid = (hi + lo)[:, None] / 2.0
        r_nodes = mid + half * legendre_x[None, :]
        total += float(np.sum(half * legendre_w[None, :] * integrand(r_nodes)))

        tail = abs(float(integrand(np.array(R)))) * 2.0 / R
        if tail <= TRACE_TAIL_TOLERANCE * abs(total) or R >= TRACE_MAX_RADIUS:
            break
        R = min(1.5 * R, TRACE_MAX_RADIUS)

    logger.debug(f"Trace integral | N={N} | power={singular_power} | R={R:.2f} | value={total:.6e}")
    return angular_value * total
