# Analyses/spherical_spectrum.py

import logging
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from numpy.polynomial.legendre import leggauss
from scipy.linalg import LinAlgError, eigh
from scipy.special import beta as beta_fn

from config import ELEMENT_QUADRATURE_ORDER, MESH_ELEMENTS
from pipeline_spectral.errors import DomainError, SpectralSolverError
from pipeline_spectral.model.params import ModelParams
from pipeline_spectral.numerics.quadrature import gauss_jacobi_rule

logger = logging.getLogger(__name__)

MIN_INTERVALS = 16


# --------------------------------------------------
# 1. Sector problem
# --------------------------------------------------

def graded_mesh(n_elements: int, s: float, grading: Optional[float] = None) -> np.ndarray:
    """phi_i = (pi/2) (i/M)^g, graded toward the equator phi = 0; g defaults to 1/min(1, 2s)."""
    if n_elements < MIN_INTERVALS:
        raise DomainError(f"Mesh needs at least {MIN_INTERVALS} intervals, got {n_elements}")
    exponent = 1.0 / min(1.0, 2.0 * s) if grading is None else float(grading)
    if not exponent >= 1.0:
        raise DomainError(f"Mesh grading exponent must be >= 1, got {exponent}")
    return (np.pi / 2.0) * (np.arange(n_elements + 1) / n_elements) ** exponent


def sector_weight(phi, params: ModelParams):
    """w(phi) = sin^{1-2s}(phi) cos^{N-1}(phi)."""
    return np.sin(phi) ** (1.0 - 2.0 * params.s) * np.cos(phi) ** (params.N - 1)


def weighted_sector_measure(params: ModelParams) -> float:
    """Integral of w over (0, pi/2), i.e. B(1-s, N/2) / 2."""
    return float(0.5 * beta_fn(1.0 - params.s, params.N / 2.0))


def max_harmonic_degree(N: int) -> Optional[int]:
    """S^0 carries only the even (l=0) and odd (l=1) sectors."""
    return 1 if N == 1 else None


@dataclass(frozen=True)
class SectorProblem:
    """
    Reduction of the half-sphere problem to harmonic degree l.

    The angular variable phi runs from the equator (phi=0, where
    theta_{N+1} = sin(phi) vanishes) to the pole (phi = pi/2).
    """
    params: ModelParams
    l: int
    mesh: np.ndarray
    lambda_l: float

    @classmethod
    def create(cls, params: ModelParams, l: int, n_elements: int = MESH_ELEMENTS,
               grading: Optional[float] = None) -> "SectorProblem":
        return cls(params=params, l=int(l), mesh=graded_mesh(n_elements, params.s, grading),
                   lambda_l=float(l * (l + params.N - 2)))

    def __post_init__(self):
        mesh = np.asarray(self.mesh, dtype=float)
        if mesh.ndim != 1 or mesh.size < MIN_INTERVALS + 1:
            raise DomainError(f"Mesh needs at least {MIN_INTERVALS} intervals, got {mesh.size - 1}")
        if mesh[0] != 0.0 or abs(mesh[-1] - np.pi / 2.0) > 1e-14 or np.any(np.diff(mesh) <= 0.0):
            raise DomainError("Mesh must increase strictly from 0 to pi/2")
        if self.l < 0:
            raise DomainError(f"Harmonic degree must be >= 0, got l={self.l}")
        l_cap = max_harmonic_degree(self.params.N)
        if l_cap is not None and self.l > l_cap:
            raise DomainError(f"N={self.params.N} admits harmonic degrees l <= {l_cap}, got l={self.l}")
        if self.lambda_l != self.l * (self.l + self.params.N - 2):
            raise DomainError(f"lambda_l={self.lambda_l} inconsistent with l={self.l}, N={self.params.N}")

    @property
    def dirichlet(self) -> bool:
        """Essential zero condition at the pole for l >= 1."""
        return self.l >= 1

    @property
    def n_free(self) -> int:
        return self.mesh.size - 1 if self.dirichlet else self.mesh.size


@dataclass(frozen=True)
class SectorMatrices:
    """
    mu-free stiffness A0 (gradient plus lambda_l / cos^2 potential) and mass B
    on the free nodes of a sector.
    """
    l: int
    mesh: np.ndarray
    stiffness: np.ndarray
    mass: np.ndarray

    @property
    def n_free(self) -> int:
        return self.stiffness.shape[0]

    def restrict(self, f_values: np.ndarray) -> np.ndarray:
        return np.asarray(f_values, dtype=float)[: self.n_free]

    def mass_form(self, f: np.ndarray, g: np.ndarray) -> float:
        return float(self.restrict(f) @ self.mass @ self.restrict(g))

    def stiffness_form(self, f: np.ndarray, g: np.ndarray) -> float:
        return float(self.restrict(f) @ self.stiffness @ self.restrict(g))


@dataclass(frozen=True)
class AngularMode:
    """
    Solved eigenpair of the half-sphere problem in sector l.

    f_values holds the profile on the full mesh (zero at the pole for
    l >= 1), normalized so that the weighted sphere norm of f times the
    unit-normalized degree-l harmonic equals one.
    """
    index_k: int
    l: int
    nu: float
    f_values: np.ndarray
    equator_trace: float
    sphere_norm: float
    sector: Optional[SectorMatrices] = None


# --------------------------------------------------
# 2. Assembly
# --------------------------------------------------

def _element_quadrature(problem: SectorProblem, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Quadrature nodes (M, q) and weights already multiplied by w(phi).

    The first element carries the sin^{1-2s} singularity and uses a
    Gauss-Jacobi rule in (1+x)^{1-2s}; the others use Gauss-Legendre.
    """
    params = problem.params
    mesh = problem.mesh
    lo, hi = mesh[:-1], mesh[1:]
    half = (hi - lo) / 2.0
    mid = (hi + lo) / 2.0

    x_leg, w_leg = leggauss(order)
    phi = mid[:, None] + half[:, None] * x_leg[None, :]
    weights = half[:, None] * w_leg[None, :] * sector_weight(phi, params)

    beta = 1.0 - 2.0 * params.s
    jacobi = gauss_jacobi_rule(order, 0.0, beta)
    h1 = hi[0]
    phi_first = h1 * (1.0 + jacobi.nodes) / 2.0
    smooth = (np.sin(phi_first) / phi_first) ** beta * np.cos(phi_first) ** (params.N - 1)
    phi[0] = phi_first
    weights[0] = (h1 / 2.0) ** (beta + 1.0) * jacobi.weights * smooth

    return phi, weights


def _assemble_forms(problem: SectorProblem, order: int = ELEMENT_QUADRATURE_ORDER) -> Tuple[np.ndarray, np.ndarray]:
    mesh = problem.mesh
    h = np.diff(mesh)
    phi, weights = _element_quadrature(problem, order)

    n0 = (mesh[1:, None] - phi) / h[:, None]
    n1 = (phi - mesh[:-1, None]) / h[:, None]
    potential = problem.lambda_l / np.cos(phi) ** 2 if problem.lambda_l != 0.0 else np.zeros_like(phi)

    grad = np.sum(weights, axis=1) / h ** 2
    k00 = grad + np.sum(weights * potential * n0 ** 2, axis=1)
    k11 = grad + np.sum(weights * potential * n1 ** 2, axis=1)
    k01 = -grad + np.sum(weights * potential * n0 * n1, axis=1)
    m00 = np.sum(weights * n0 ** 2, axis=1)
    m11 = np.sum(weights * n1 ** 2, axis=1)
    m01 = np.sum(weights * n0 * n1, axis=1)

    if not all(np.all(np.isfinite(v)) for v in (k00, k11, k01, m00, m11, m01)):
        raise SpectralSolverError(f"Non-finite element integrals | l={problem.l}")

    size = mesh.size
    stiff_diag = np.zeros(size)
    mass_diag = np.zeros(size)
    stiff_diag[:-1] += k00
    stiff_diag[1:] += k11
    mass_diag[:-1] += m00
    mass_diag[1:] += m11

    A0 = np.diag(stiff_diag) + np.diag(k01, 1) + np.diag(k01, -1)
    B = np.diag(mass_diag) + np.diag(m01, 1) + np.diag(m01, -1)

    n_free = problem.n_free
    return A0[:n_free, :n_free], B[:n_free, :n_free]


def assemble_sector(problem: SectorProblem) -> Tuple[np.ndarray, np.ndarray]:
    """
    Stiffness A and mass B of the sector problem.

    A = A0 - mu e0 e0^T, where A0 holds the weighted gradient and the
    lambda_l / cos^2 potential and the rank-one term is the equator
    boundary condition.
    """
    A0, B = _assemble_forms(problem)
    A = A0.copy()
    A[0, 0] -= problem.params.mu
    return A, B


# --------------------------------------------------
# 3. Eigen-solve
# --------------------------------------------------

def _orient(vector: np.ndarray) -> np.ndarray:
    """Sign convention: f(0) >= 0, or the largest entry positive when f(0) = 0."""
    scale = np.max(np.abs(vector))
    pivot = vector[0] if abs(vector[0]) > 1e-12 * scale else vector[np.argmax(np.abs(vector))]
    return vector if pivot >= 0.0 else -vector


def solve_sector(problem: SectorProblem, count: int) -> List[AngularMode]:
    """
    Lowest `count` eigenpairs of A f = nu B f in one sector.

    Parameters
    ----------
    problem : SectorProblem
    count : int
        Number of eigenpairs (>= 1, at most the number of free nodes).

    Returns
    -------
    list of AngularMode
        Ranked 1..count within the sector; index_k is reassigned by
        solve_angular_spectrum when sectors are merged.
    """
    if count < 1:
        raise DomainError(f"count must be >= 1, got count={count}")
    if count > problem.n_free:
        raise DomainError(f"count={count} exceeds the {problem.n_free} free nodes of the sector")

    A0, B = _assemble_forms(problem)
    A = A0.copy()
    A[0, 0] -= problem.params.mu

    try:
        nus, vectors = eigh(A, B, subset_by_index=[0, count - 1])
    except LinAlgError as exc:
        raise SpectralSolverError(f"Sector eigensolve failed | l={problem.l} | {exc}") from exc

    sector = SectorMatrices(l=problem.l, mesh=problem.mesh, stiffness=A0, mass=B)
    floor = problem.params.nu_floor

    modes = []
    for rank, (nu, vec) in enumerate(zip(nus, vectors.T), start=1):
        if not nu > floor:
            raise SpectralSolverError(
                f"Eigenvalue below the Hardy floor | l={problem.l} | nu={nu} | floor={floor}"
            )
        vec = _orient(vec)
        f_values = np.zeros(problem.mesh.size)
        f_values[: problem.n_free] = vec
        f_values.setflags(write=False)
        modes.append(AngularMode(
            index_k=rank,
            l=problem.l,
            nu=float(nu),
            f_values=f_values,
            equator_trace=float(f_values[0]),
            sphere_norm=float(np.sqrt(vec @ B @ vec)),
            sector=sector,
        ))

    logger.info(
        f"Sector solved | l={problem.l} | n_elements={problem.mesh.size - 1} | "
        f"mu={problem.params.mu:.6g} | nu_min={modes[0].nu:.6f}"
    )
    return modes


def equator_trace(mode: AngularMode) -> float:
    """f(0) of a mass-normalized mode."""
    return float(mode.f_values[0])


def _solve_one(params: ModelParams, l: int, count: int, n_elements: int,
               grading: Optional[float]) -> List[AngularMode]:
    return solve_sector(SectorProblem.create(params, l, n_elements, grading), count)


def solve_angular_spectrum(
    params: ModelParams,
    sectors: Dict[int, int],
    n_elements: int = MESH_ELEMENTS,
    jobs: int = 1,
    grading: Optional[float] = None
) -> List[AngularMode]:
    """
    Solve every sector {l: count} and merge into globally ranked modes.

    Ties are ordered by (nu, l).
    """
    if not sectors:
        raise DomainError("At least one sector is required")

    items = sorted(sectors.items())
    if jobs == 1:
        results = [_solve_one(params, l, count, n_elements, grading) for l, count in items]
    else:
        results = Parallel(n_jobs=jobs)(
            delayed(_solve_one)(params, l, count, n_elements, grading) for l, count in items
        )

    merged = sorted((m for modes in results for m in modes), key=lambda m: (m.nu, m.l))
    ranked = [replace(m, index_k=k) for k, m in enumerate(merged, start=1)]

    logger.info(f"Angular spectrum | n_sectors={len(items)} | n_modes={len(ranked)} | jobs={jobs}")
    return ranked


# --------------------------------------------------
# 4. Sphere trace inequality
# --------------------------------------------------

def sphere_trace_inequality_check(
    f_values: np.ndarray | AngularMode,
    params: ModelParams,
    sector: Optional[SectorMatrices] = None
) -> float:
    """
    Slack of the sphere trace inequality for psi = f(phi) Y_l.

        RHS = int theta^{1-2s} |grad psi|^2 + ((N-2s)/2)^2 int theta^{1-2s} psi^2
        LHS = int_{S^{N-1}} psi^2 = f(0)^2

    Returns RHS - kappa_s Lambda_{N,s} LHS, computed with the sector's
    P1 forms.
    """
    if isinstance(f_values, AngularMode):
        sector = f_values.sector if sector is None else sector
        f_values = f_values.f_values
    if sector is None:
        raise DomainError("Sector matrices are required for the sphere trace check")

    f = np.asarray(f_values, dtype=float)
    rhs = sector.stiffness_form(f, f) + params.half_gap ** 2 * sector.mass_form(f, f)
    lhs = f[0] ** 2
    return float(rhs - params.hardy_threshold * lhs)


def spectrum_frame(modes: Sequence[AngularMode], alphas: Optional[Sequence[float]] = None) -> pd.DataFrame:
    """Spectrum table with columns k, l, nu, alpha, equator_trace."""
    df = pd.DataFrame({
        "k": [m.index_k for m in modes],
        "l": [m.l for m in modes],
        "nu": [m.nu for m in modes],
        "alpha": list(alphas) if alphas is not None else [np.nan] * len(modes),
        "equator_trace": [m.equator_trace for m in modes],
    })
    return df
