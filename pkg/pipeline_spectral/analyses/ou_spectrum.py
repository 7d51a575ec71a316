# Analyses/ou_spectrum.py

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.linalg import LinAlgError, eigh
from scipy.special import gammaln

from config import LAGUERRE_ORDER, TIE_TOLERANCE
from pipeline_spectral.errors import DomainError, SingularityError, SpectralSolverError
from pipeline_spectral.model.params import ModelParams, unit_sphere_area
from pipeline_spectral.numerics.quadrature import halfspace_gaussian_integral
from pipeline_spectral.numerics.special_functions import (
    laguerre_binomial,
    laguerre_gen_derivative,
    p_poly,
)
from pipeline_spectral.analyses.spherical_spectrum import AngularMode

logger = logging.getLogger(__name__)

DEGENERATE_RADICAND = 1e-8


# --------------------------------------------------
# 1. Basis elements
# --------------------------------------------------

def alpha_exponent(nu: float, params: ModelParams) -> float:
    """
    alpha = (N-2s)/2 - sqrt(((N-2s)/2)^2 + nu).

    """
    radicand = params.half_gap ** 2 + nu
    if radicand <= 0.0:
        raise DomainError(
            f"nu={nu} is at or below the bound -((N-2s)/2)^2={params.nu_floor}"
        )
    if radicand < DEGENERATE_RADICAND:
        logger.warning(f"Near-degenerate exponent | nu={nu} | radicand={radicand:.3e}")
    return float(params.half_gap - np.sqrt(radicand))


def normalization_constant(n: int, a: float, alpha: float, params: ModelParams) -> float:
    """
    ||Y_{n,j}||_L for Y = |z|^{-alpha} P_{j,n}(|z|^2/4) psi_j.

    ||Y||^2 = 2^{N+1-2s-2 alpha} binom(n+a, n)^{-2} Gamma(n+a+1) / n!
    """
    if a <= -1.0:
        raise DomainError(f"Laguerre parameter must exceed -1, got a={a}")
    log_sq = (
        (params.N + 1.0 - 2.0 * params.s - 2.0 * alpha) * np.log(2.0)
        - 2.0 * np.log(laguerre_binomial(n, a))
        + gammaln(n + a + 1.0) - gammaln(n + 1.0)
    )
    return float(np.exp(0.5 * log_sq))


@dataclass(frozen=True)
class OUBasisElement:
    """
    Eigenfunction Y_{n,j} = |z|^{-alpha_j} P_{j,n}(|z|^2/4) psi_j with
    eigenvalue gamma = n - alpha_j / 2.
    """
    n: int
    j: int
    l: int
    nu: float
    alpha: float
    a: float
    gamma: float
    norm_const: float
    angular: AngularMode

    @property
    def b_param(self) -> float:
        """(N+2-2s)/2 - alpha_j, equal to a_j + 1."""
        return 1.0 + self.a

    @property
    def equator_trace(self) -> float:
        return self.angular.equator_trace

    def radial_poly(self, t):
        return p_poly(self.n, self.b_param, t)

    def radial_poly_derivative(self, t):
        return laguerre_gen_derivative(self.n, self.a, t) / laguerre_binomial(self.n, self.a)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "j": self.j,
            "l": self.l,
            "nu": self.nu,
            "alpha": self.alpha,
            "a": self.a,
            "gamma": self.gamma,
            "norm_const": self.norm_const,
            "equator_trace": self.equator_trace,
        }


def make_element(n: int, mode: AngularMode, params: ModelParams) -> OUBasisElement:
    alpha = alpha_exponent(mode.nu, params)
    a = params.half_gap - alpha
    return OUBasisElement(
        n=n,
        j=mode.index_k,
        l=mode.l,
        nu=mode.nu,
        alpha=alpha,
        a=a,
        gamma=n - alpha / 2.0,
        norm_const=normalization_constant(n, a, alpha, params),
        angular=mode,
    )


# --------------------------------------------------
# 2. Spectrum table
# --------------------------------------------------

@dataclass(frozen=True)
class SpectrumTable:
    """
    Truncated OU eigenbasis sorted by gamma, partitioned into eigenvalue
    groups of shared gamma up to tie_tolerance.
    """
    elements: Tuple[OUBasisElement, ...]
    groups: Tuple[Tuple[int, ...], ...]
    params: ModelParams
    tie_tolerance: float = TIE_TOLERANCE

    @property
    def size(self) -> int:
        return len(self.elements)

    @property
    def gammas(self) -> np.ndarray:
        return np.array([e.gamma for e in self.elements])

    @property
    def group_gammas(self) -> np.ndarray:
        return np.array([self.elements[g[0]].gamma for g in self.groups])

    def group_of(self, index: int) -> int:
        for gi, members in enumerate(self.groups):
            if index in members:
                return gi
        raise DomainError(f"Element index {index} not in table of size {self.size}")

    def nearest_group(self, value: float) -> Tuple[int, float]:
        """Group whose gamma is closest to value, and the distance."""
        distances = np.abs(self.group_gammas - value)
        gi = int(np.argmin(distances))
        return gi, float(distances[gi])

    def multiplicity(self, gi: int) -> int:
        return len(self.groups[gi])

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame([e.to_dict() for e in self.elements])
        df["group"] = [self.group_of(i) for i in range(self.size)]
        return df

    def to_records(self) -> List[dict]:
        return [e.to_dict() for e in self.elements]


def group_by_tolerance(gammas: Sequence[float], tolerance: float) -> Tuple[Tuple[int, ...], ...]:
    """Partition indices of an ascending sequence; a group opens when gamma
    leaves tolerance of the group's first member."""
    groups: List[List[int]] = []
    for i, g in enumerate(gammas):
        if groups and abs(g - gammas[groups[-1][0]]) <= tolerance:
            groups[-1].append(i)
        else:
            groups.append([i])
    return tuple(tuple(g) for g in groups)


def build_spectrum(
    modes: Sequence[AngularMode],
    n_max: int,
    params: ModelParams,
    tie_tolerance: float = TIE_TOLERANCE,
    j_max: Optional[int] = None
) -> SpectrumTable:
    """
    All elements (n, j) with n <= n_max over the supplied angular modes.

    Parameters
    ----------
    modes : sequence of AngularMode
        Ranked angular modes; only the first j_max are used when given.
    n_max : int
        Largest radial index.
    tie_tolerance : float
        Absolute tolerance for grouping equal eigenvalues.

    Returns
    -------
    SpectrumTable
        Elements sorted ascending by gamma (ties by n, then j).
    """
    if not modes:
        raise DomainError("At least one angular mode is required")
    if n_max < 0:
        raise DomainError(f"n_max must be >= 0, got n_max={n_max}")

    used = list(modes)[:j_max] if j_max is not None else list(modes)
    elements = [make_element(n, mode, params) for mode in used for n in range(n_max + 1)]
    elements.sort(key=lambda e: (e.gamma, e.n, e.j))

    groups = group_by_tolerance([e.gamma for e in elements], tie_tolerance)
    table = SpectrumTable(elements=tuple(elements), groups=groups, params=params,
                          tie_tolerance=tie_tolerance)

    logger.info(
        f"Spectrum built | n_elements={table.size} | n_groups={len(groups)} | "
        f"gamma_min={elements[0].gamma:.6f} | max_multiplicity={max(len(g) for g in groups)}"
    )
    return table



def eval_eigenfunction(element: OUBasisElement, r, phi, params: ModelParams, harmonic: Optional[float] = None):
    """
    Normalized eigenfunction r^{-alpha} P(r^2/4) f(phi) Y_l / norm_const.

    For l = 0 the harmonic is the constant |S^{N-1}|^{-1/2}; for l >= 1 the
    value is given per unit harmonic unless `harmonic` is passed.
    """
    r = np.asarray(r, dtype=float)
    if element.alpha > 0.0 and np.any(r == 0.0):
        raise SingularityError(f"Eigenfunction singular at r=0 (alpha={element.alpha})")

    if harmonic is None:
        harmonic = unit_sphere_area(params.N - 1) ** -0.5 if element.l == 0 else 1.0

    mode = element.angular
    mesh = mode.sector.mesh if mode.sector is not None else np.linspace(0.0, np.pi / 2.0, mode.f_values.size)
    profile = np.interp(phi, mesh, mode.f_values)
    value = r ** (-element.alpha) * element.radial_poly(r ** 2 / 4.0) * profile * harmonic / element.norm_const
    return float(value) if np.ndim(value) == 0 else value


# --------------------------------------------------
# 3. Gaussian-space quadratic forms
# --------------------------------------------------

FORM_NAMES = (
    "mass",
    "dirichlet",
    "inverse_square",
    "second_moment",
    "radial_derivative",
    "weighted_trace",
    "trace",
)


@dataclass(frozen=True)
class GaussianForms:
    """
    Quadratic forms on the span of a normalized table.

    mass            int y^{1-2s} Y_a Y_b G
    dirichlet       int y^{1-2s} grad Y_a . grad Y_b G
    inverse_square  int y^{1-2s} |z|^{-2} Y_a Y_b G
    second_moment   int y^{1-2s} |z|^2 Y_a Y_b G
    radial_derivative  int y^{1-2s} Y_a (z . grad Y_b) G   (not symmetric)
    weighted_trace  int |x|^{-2s} Tr Y_a Tr Y_b G(x, 0) dx
    trace           int Tr Y_a Tr Y_b G(x, 0) dx
    """
    mass: np.ndarray
    dirichlet: np.ndarray
    inverse_square: np.ndarray
    second_moment: np.ndarray
    radial_derivative: np.ndarray
    weighted_trace: np.ndarray
    trace: np.ndarray

    @property
    def energy(self) -> np.ndarray:
        """Gram matrix of the H norm, mass plus Dirichlet."""
        return self.mass + self.dirichlet


def _radial_derivative_poly(element: OUBasisElement, t):
    """r^{alpha} * r dR/dr with R = r^{-alpha} P(r^2/4), as a function of t = r^2/4."""
    return -element.alpha * element.radial_poly(t) + 2.0 * t * element.radial_poly_derivative(t)


def pair_forms(
    ea: OUBasisElement,
    eb: OUBasisElement,
    params: ModelParams,
    order: int = LAGUERRE_ORDER
) -> Dict[str, float]:
    """
    All Gaussian-space forms between two normalized basis elements.

    Elements of different harmonic degree are orthogonal in every form.
    The key "radial_derivative_ba" holds the transposed entry.
    """
    zero = {name: 0.0 for name in FORM_NAMES}
    zero["radial_derivative_ba"] = 0.0
    if ea.l != eb.l:
        return zero

    sector = ea.angular.sector
    if sector is None:
        raise SpectralSolverError(f"Angular mode j={ea.j} carries no sector matrices")

    fa, fb = ea.angular.f_values, eb.angular.f_values
    ang_mass = sector.mass_form(fa, fb)
    ang_stiff = sector.stiffness_form(fa, fb)
    ang_trace = float(fa[0] * fb[0])

    sigma = (ea.alpha + eb.alpha) / 2.0
    scale = ea.norm_const * eb.norm_const

    def product(t):
        return ea.radial_poly(t) * eb.radial_poly(t)

    def integral(radial, angular_value, shift):
        if angular_value == 0.0:
            return 0.0
        return halfspace_gaussian_integral(radial, angular_value, params, order, sigma + shift) / scale

    forms = {
        "mass": integral(product, ang_mass, 0.0),
        "inverse_square": integral(product, ang_mass, 1.0),
        "second_moment": integral(lambda t: 4.0 * t * product(t), ang_mass, 0.0),
        "dirichlet": (
            integral(lambda t: _radial_derivative_poly(ea, t) * _radial_derivative_poly(eb, t), ang_mass, 1.0)
            + integral(product, ang_stiff, 1.0)
        ),
        "radial_derivative": integral(lambda t: ea.radial_poly(t) * _radial_derivative_poly(eb, t), ang_mass, 0.0),
        "radial_derivative_ba": integral(lambda t: eb.radial_poly(t) * _radial_derivative_poly(ea, t), ang_mass, 0.0),
        "weighted_trace": integral(product, ang_trace, 1.0),
        "trace": integral(product, ang_trace, 1.0 - params.s),
    }
    return forms


def gaussian_gram_matrices(table: SpectrumTable, order: int = LAGUERRE_ORDER) -> GaussianForms:
    """
    Dense Gram matrices of all Gaussian-space forms on the table.

    Parameters
    ----------
    table : SpectrumTable
    order : int
        Gauss-Laguerre order; every radial integrand is a polynomial of
        degree <= 2 n_max + 1, integrated exactly.

    Returns
    -------
    GaussianForms
    """
    size = table.size
    mats = {name: np.zeros((size, size)) for name in FORM_NAMES}

    for i in range(size):
        for j in range(i, size):
            forms = pair_forms(table.elements[i], table.elements[j], table.params, order)
            for name in FORM_NAMES:
                if name == "radial_derivative":
                    continue
                mats[name][i, j] = mats[name][j, i] = forms[name]
            mats["radial_derivative"][i, j] = forms["radial_derivative"]
            mats["radial_derivative"][j, i] = forms["radial_derivative_ba"]

    logger.info(f"Gaussian forms assembled | size={size} | order={order}")
    return GaussianForms(**mats)


def gram_check(table: SpectrumTable, order: int = LAGUERRE_ORDER) -> float:
    """max |G_ab - delta_ab| of the L Gram matrix of the normalized basis."""
    forms = gaussian_gram_matrices(table, order)
    defect = float(np.max(np.abs(forms.mass - np.eye(table.size))))
    logger.info(f"Gram check | size={table.size} | max_defect={defect:.3e}")
    return defect


def eigen_residual_check(
    element: OUBasisElement,
    tests: Sequence[OUBasisElement],
    params: ModelParams,
    order: int = LAGUERRE_ORDER
) -> float:
    """
    Weak eigen-equation residual of a normalized element against tests

        |a(Y, V) - mu int |x|^{-2s} Tr Y Tr V G dx - gamma <Y, V>_L|

    with a the weighted Dirichlet form; elements are L-normalized so no
    further scaling is applied.
    """
    worst = 0.0
    for test in tests:
        forms = pair_forms(element, test, params, order)
        residual = forms["dirichlet"] - params.mu * forms["weighted_trace"] - element.gamma * forms["mass"]
        worst = max(worst, abs(residual))
    return worst


def coercivity_estimate(table: SpectrumTable, forms: Optional[GaussianForms] = None) -> float:
    """
    Smallest generalized Rayleigh quotient of

        B(V) + q ||V||^2   over   ||grad V||^2 + q ||V||^2,   q = (N+2-2s)/4,

    on the span of the table, capped at 1.
    """
    if table.size == 0:
        raise DomainError("Coercivity estimate needs a nonempty table")
    forms = gaussian_gram_matrices(table) if forms is None else forms

    q = table.params.ou_shift
    numerator = np.diag(table.gammas) + q * np.eye(table.size)
    denominator = forms.dirichlet + q * forms.mass
    denominator = (denominator + denominator.T) / 2.0

    try:
        lowest = float(eigh(numerator, denominator, eigvals_only=True, subset_by_index=[0, 0])[0])
    except LinAlgError as exc:
        raise SpectralSolverError(f"Coercivity eigensolve failed | {exc}") from exc

    if lowest <= 0.0:
        raise SpectralSolverError(f"Non-positive coercivity estimate {lowest}: basis or quadrature defect")

    logger.info(f"Coercivity | mu={table.params.mu:.6g} | C_est={lowest:.6f}")
    return min(lowest, 1.0)
