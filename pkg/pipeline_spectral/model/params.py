# Model/params.py

import logging
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np
from scipy.special import gamma

from pipeline_spectral.errors import DomainError

logger = logging.getLogger(__name__)

CONSTANT_RTOL = 1e-13


# --------------------------------------------------
# 1. Closed-form constants
# --------------------------------------------------

def compute_constants(N: int, s: float) -> Tuple[float, float]:
    """
    Return (kappa_s, Lambda_{N,s}).

    kappa_s     = Gamma(1-s) / (2^{2s-1} Gamma(s))
    Lambda_{N,s} = 2^{2s} Gamma^2((N+2s)/4) / Gamma^2((N-2s)/4)
    """
    if not 0.0 < s < 1.0:
        raise DomainError(f"Order s must lie in (0, 1), got s={s}")
    if N < 1 or N <= 2.0 * s:
        raise DomainError(f"Dimension must satisfy N >= 1 and N > 2s, got N={N}, s={s}")

    kappa_s = gamma(1.0 - s) / (2.0 ** (2.0 * s - 1.0) * gamma(s))
    lambda_ns = 2.0 ** (2.0 * s) * (gamma((N + 2.0 * s) / 4.0) / gamma((N - 2.0 * s) / 4.0)) ** 2

    return float(kappa_s), float(lambda_ns)


def unit_sphere_area(d: int) -> float:
    """Surface measure of the unit sphere S^d in R^{d+1}."""
    if d < 0:
        raise DomainError(f"Sphere dimension must be >= 0, got d={d}")
    return float(2.0 * np.pi ** ((d + 1) / 2.0) / gamma((d + 1) / 2.0))


# --------------------------------------------------
# 2. Model parameters
# --------------------------------------------------

@dataclass(frozen=True)
class ModelParams:
    """
    Problem parameters (N, s, mu) with derived constants.

    mu_margin defaults to MU_MARGIN_FRACTION * kappa_s * lambda_Ns when
    built through ``ModelParams.create``.
    """
    N: int
    s: float
    mu: float
    kappa_s: float
    lambda_Ns: float
    mu_margin: float

    @classmethod
    def create(cls, N: int, s: float, mu: float = 0.0, mu_margin: float | None = None,
               margin_fraction: float = 1e-6, strict: bool = True) -> "ModelParams":
        """
        Build parameters with the closed-form constants.

        With strict=False an invalid (N, s) yields NaN constants instead of
        raising, so that validate_params can report it.
        """
        try:
            kappa_s, lambda_ns = compute_constants(N, s)
        except DomainError:
            if strict:
                raise
            kappa_s, lambda_ns = float("nan"), float("nan")
            mu_margin = margin_fraction if mu_margin is None else mu_margin
        if mu_margin is None:
            mu_margin = margin_fraction * kappa_s * lambda_ns
        return cls(N=int(N), s=float(s), mu=float(mu), kappa_s=kappa_s,
                   lambda_Ns=lambda_ns, mu_margin=float(mu_margin))

    @property
    def hardy_threshold(self) -> float:
        """kappa_s * Lambda_{N,s}, the sharp bound on mu."""
        return self.kappa_s * self.lambda_Ns

    @property
    def half_gap(self) -> float:
        """(N - 2s) / 2."""
        return (self.N - 2.0 * self.s) / 2.0

    @property
    def nu_floor(self) -> float:
        """-((N - 2s)/2)^2, strict lower bound of the angular spectrum."""
        return -self.half_gap ** 2

    @property
    def ou_shift(self) -> float:
        """(N + 2 - 2s) / 4."""
        return (self.N + 2.0 - 2.0 * self.s) / 4.0

    def with_mu(self, mu: float) -> "ModelParams":
        return ModelParams(N=self.N, s=self.s, mu=float(mu), kappa_s=self.kappa_s,
                           lambda_Ns=self.lambda_Ns, mu_margin=self.mu_margin)

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "s": self.s,
            "mu": self.mu,
            "kappa_s": self.kappa_s,
            "lambda_Ns": self.lambda_Ns,
            "mu_margin": self.mu_margin,
        }


@dataclass(frozen=True)
class ValidationReport:
    accepted: bool
    violations: List[str] = field(default_factory=list)


def validate_params(params: ModelParams) -> ValidationReport:
    """
    Check the standing assumptions on (N, s, mu).

    Never raises: every violated condition is listed in the report.
    """
    violations = []

    if not 0.0 < params.s < 1.0:
        violations.append(f"s in (0,1) fails: s={params.s}")

    if params.N < 1:
        violations.append(f"N >= 1 fails: N={params.N}")

    if not params.N > 2.0 * params.s:
        violations.append(f"N > 2s fails: N={params.N}, 2s={2.0 * params.s}")

    if not params.mu_margin > 0.0:
        violations.append(f"mu_margin > 0 fails: mu_margin={params.mu_margin}")

    if not violations:
        kappa_s, lambda_ns = compute_constants(params.N, params.s)

        if abs(params.kappa_s - kappa_s) > CONSTANT_RTOL * abs(kappa_s):
            violations.append(f"kappa_s mismatch: stored={params.kappa_s}, closed_form={kappa_s}")
        if abs(params.lambda_Ns - lambda_ns) > CONSTANT_RTOL * abs(lambda_ns):
            violations.append(f"lambda_Ns mismatch: stored={params.lambda_Ns}, closed_form={lambda_ns}")

        bound = kappa_s * lambda_ns - params.mu_margin
        if not params.mu <= bound:
            violations.append(
                f"mu <= kappa_s*lambda_Ns - mu_margin fails: mu={params.mu}, bound={bound}"
            )

    if violations:
        logger.info(f"Parameter validation | rejected | n_violations={len(violations)}")
    return ValidationReport(accepted=not violations, violations=violations)


# --------------------------------------------------
# 3. Gaussian kernel G_s(z, t) = t^{-(N+2-2s)/2} exp(-|z|^2 / 4t)
# --------------------------------------------------

@dataclass(frozen=True)
class GaussianKernel:
    params: ModelParams

    @property
    def exponent(self) -> float:
        return (self.params.N + 2.0 - 2.0 * self.params.s) / 2.0

    def value(self, z: np.ndarray, t: float) -> np.ndarray:
        """G_s at points z of shape (..., N+1); G(z) = value(z, 1)."""
        z = np.asarray(z, dtype=float)
        if t <= 0.0:
            raise DomainError(f"Kernel time must be positive, got t={t}")
        r2 = np.sum(z ** 2, axis=-1)
        return t ** (-self.exponent) * np.exp(-r2 / (4.0 * t))

    def gradient(self, z: np.ndarray, t: float) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return -(z / (2.0 * t)) * self.value(z, t)[..., None]

    def finite_difference_gradient(self, z: np.ndarray, t: float, step: float = 1e-5) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        grad = np.empty_like(z)
        for i in range(z.shape[-1]):
            shift = np.zeros(z.shape[-1])
            shift[i] = step
            grad[..., i] = (self.value(z + shift, t) - self.value(z - shift, t)) / (2.0 * step)
        return grad

    def heat_residual(self, z: np.ndarray, t: float) -> np.ndarray:
        """
        y^{1-2s} dG/dt - div(y^{1-2s} grad G), both terms from the closed form.

        The last coordinate of z is the extension variable y > 0.
        """
        z = np.asarray(z, dtype=float)
        N, s = self.params.N, self.params.s
        y = z[..., -1]
        r2 = np.sum(z ** 2, axis=-1)
        G = self.value(z, t)
        weight = y ** (1.0 - 2.0 * s)

        time_term = weight * G * (-self.exponent / t + r2 / (4.0 * t ** 2))
        # div(y^{1-2s} * (-z/2t) G) expanded term by term
        div_term = -(G / (2.0 * t)) * (
            (1.0 - 2.0 * s) * y ** (-2.0 * s) * y
            + weight * (N + 1.0)
            - weight * r2 / (2.0 * t)
        )
        return time_term - div_term
