# Model/perturbation.py

import logging
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from pipeline_spectral.errors import DomainError, SingularityError
from pipeline_spectral.model.params import ModelParams

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PerturbationSpec:
    """
    Radial perturbing potential in the backward time variable

        h(x, t) = (1 + b t) [A |x|^{-2s+eps} + B] exp(-|x|^2).
    """
    amplitude_A: float = 0.0
    amplitude_B: float = 0.0
    epsilon: float = 0.5
    time_slope: float = 0.0
    C_g: float = 1.0

    def singular_exponent(self, params: ModelParams) -> float:
        """-2s + eps, the power of |x| in the singular term."""
        return -2.0 * params.s + self.epsilon

    def decay_rate(self, s: float) -> float:
        """Exponent delta of the perturbative correction: eps/2 for A != 0, s for the bounded part alone."""
        if self.amplitude_A != 0.0:
            return self.epsilon / 2.0
        return s

    def is_trivial(self) -> bool:
        return self.amplitude_A == 0.0 and self.amplitude_B == 0.0

    def to_dict(self) -> dict:
        return {
            "amplitude_A": self.amplitude_A,
            "amplitude_B": self.amplitude_B,
            "epsilon": self.epsilon,
            "time_slope": self.time_slope,
            "C_g": self.C_g,
        }


def validate_perturbation(spec: PerturbationSpec, params: ModelParams) -> list[str]:
    violations = []
    if not 0.0 < spec.epsilon < 2.0 * params.s:
        violations.append(f"epsilon in (0, 2s) fails: epsilon={spec.epsilon}, 2s={2.0 * params.s}")
    if not spec.C_g > 0.0:
        violations.append(f"C_g > 0 fails: C_g={spec.C_g}")
    return violations


def perturbation_eval(spec: PerturbationSpec, r, t: float, params: ModelParams):
    """
    h at radius r >= 0 and backward time t.

    r may be a scalar or an array; r = 0 is allowed only when A = 0.
    """
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0.0):
        raise DomainError("Radius must be non-negative")

    time_factor = 1.0 + spec.time_slope * t
    p = spec.singular_exponent(params)

    if spec.amplitude_A != 0.0:
        if np.any(r_arr == 0.0):
            raise SingularityError(
                f"h is singular at r=0 when A != 0 (A={spec.amplitude_A}, power={p})"
            )
        radial = spec.amplitude_A * r_arr ** p + spec.amplitude_B
    else:
        radial = np.full_like(r_arr, spec.amplitude_B)

    value = time_factor * radial * np.exp(-r_arr ** 2)
    return float(value) if value.ndim == 0 else value


def perturbation_radial_derivative(spec: PerturbationSpec, r, t: float, params: ModelParams):
    """x . grad h at |x| = r, i.e. r dh/dr."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr <= 0.0) and spec.amplitude_A != 0.0:
        raise SingularityError("r dh/dr is singular at r=0 when A != 0")

    time_factor = 1.0 + spec.time_slope * t
    p = spec.singular_exponent(params)
    singular = spec.amplitude_A * r_arr ** p if spec.amplitude_A != 0.0 else np.zeros_like(r_arr)

    value = time_factor * (p * singular - 2.0 * r_arr ** 2 * (singular + spec.amplitude_B)) * np.exp(-r_arr ** 2)
    return float(value) if value.ndim == 0 else value


class BoundCheck(NamedTuple):
    ok: bool
    max_ratio: float


def check_subhomogeneous_bound(
    spec: PerturbationSpec,
    params: ModelParams,
    radii: Sequence[float],
    times: Sequence[float],
    include_gradient: bool = False
) -> BoundCheck:
    """
    Pointwise check of |h| (+ |x . grad h|) <= C_g (1 + r^{-2s+eps}) on a grid.

    Returns the verdict and the maximal ratio lhs / rhs over the grid.
    """
    radii = np.asarray(radii, dtype=float)
    times = np.asarray(times, dtype=float)
    if radii.size == 0 or times.size == 0:
        raise DomainError("Bound check needs a nonempty (r, t) grid")
    if np.any(radii <= 0.0):
        raise DomainError("Bound check grid must have r > 0")

    envelope = spec.C_g * (1.0 + radii ** spec.singular_exponent(params))

    max_ratio = 0.0
    for t in times:
        lhs = np.abs(perturbation_eval(spec, radii, t, params))
        if include_gradient:
            lhs = lhs + np.abs(perturbation_radial_derivative(spec, radii, t, params))
        max_ratio = max(max_ratio, float(np.max(lhs / envelope)))

    logger.info(
        f"Subhomogeneous bound | n_points={radii.size * times.size} | "
        f"max_ratio={max_ratio:.6g} | gradient={include_gradient}"
    )
    return BoundCheck(ok=max_ratio <= 1.0, max_ratio=max_ratio)
