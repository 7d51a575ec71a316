# Analyses/frequency.py

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from config import FREQUENCY_TOLERANCE, SLACK_TOLERANCE
from pipeline_spectral.errors import DomainError
from pipeline_spectral.model.params import ModelParams
from pipeline_spectral.analyses.diagnostics import loglog_fit
from pipeline_spectral.analyses.evolution import EvolutionConfig, FrequencyTrace, evolve
from pipeline_spectral.analyses.ou_spectrum import SpectrumTable

logger = logging.getLogger(__name__)

UNIFORM_SPACING_TOLERANCE = 1e-9


# --------------------------------------------------
# 1. H' = 2D
# --------------------------------------------------

def verify_h_prime(trace: FrequencyTrace) -> float:
    """
    Max relative defect |dH/dtau - 2 t D| / max(|2 t D|, H) at interior
    samples, with dH/dtau from a five-point central stencil in tau = log t.

    Only samples whose four neighbours sit on the uniform part of the
    geometric grid are used.
    """
    if trace.n_samples < 5:
        raise DomainError(f"H' check needs at least 5 samples, got {trace.n_samples}")

    tau = np.log(trace.t)
    H = trace.H
    two_tD = 2.0 * trace.t * trace.D
    steps = np.diff(tau)
    step = steps[0]

    worst = 0.0
    for i in range(2, trace.n_samples - 2):
        local = steps[i - 2:i + 2]
        if np.max(np.abs(local - step)) > UNIFORM_SPACING_TOLERANCE * abs(step):
            continue
        dH = (-H[i + 2] + 8.0 * H[i + 1] - 8.0 * H[i - 1] + H[i - 2]) / (12.0 * step)
        scale = max(abs(two_tD[i]), H[i])
        if scale == 0.0:
            continue
        worst = max(worst, abs(dH - two_tD[i]) / scale)

    logger.info(f"H' = 2D check | n_samples={trace.n_samples} | max_defect={worst:.3e}")
    return worst


# --------------------------------------------------
# 2. Vanishing order
# --------------------------------------------------

@dataclass(frozen=True)
class VanishingFit:
    gamma_fit: float
    residual: float
    ratio_min: float
    ratio_max: float
    n_samples: int

    @property
    def ratio_spread(self) -> float:
        """max / min of t^{-2 gamma_fit} H over the window."""
        return self.ratio_max / self.ratio_min


def fit_vanishing_order(trace: FrequencyTrace, window: Tuple[float, float]) -> VanishingFit:
    """
    Slope of log H against log t over the window, halved.

    Parameters
    ----------
    trace : FrequencyTrace
    window : (t_lo, t_hi)
        Closed time window inside the sampled range.

    Returns
    -------
    VanishingFit
        gamma_fit, RMS residual of the regression and the range of
        t^{-2 gamma_fit} H on the window.
    """
    t_lo, t_hi = window
    if not 0.0 < t_lo < t_hi:
        raise DomainError(f"Invalid fit window ({t_lo}, {t_hi})")
    mask = (trace.t >= t_lo * (1 - 1e-12)) & (trace.t <= t_hi * (1 + 1e-12))
    if mask.sum() < 3:
        raise DomainError(f"Fit window ({t_lo:.3e}, {t_hi:.3e}) holds {int(mask.sum())} samples, need 3")

    t, H = trace.t[mask], trace.H[mask]
    if np.any(H <= 0.0):
        raise DomainError("Height must be positive on the fit window")

    slope, _, residual = loglog_fit(t, H)
    gamma_fit = slope / 2.0
    ratio = t ** (-2.0 * gamma_fit) * H
    trace.fit_window = (float(t.min()), float(t.max()))

    logger.info(
        f"Vanishing order | window=({t_lo:.1e}, {t_hi:.1e}) | gamma_fit={gamma_fit:.8f} | "
        f"residual={residual:.2e} | ratio_spread={ratio.max() / ratio.min():.6f}"
    )
    return VanishingFit(gamma_fit=gamma_fit, residual=residual, ratio_min=float(ratio.min()),
                        ratio_max=float(ratio.max()), n_samples=int(mask.sum()))


# --------------------------------------------------
# 3. Frequency limit
# --------------------------------------------------

@dataclass(frozen=True)
class FrequencyLimit:
    gamma_limit: float
    nearest_gamma: float
    distance: float
    group_index: int
    cauchy_variation: float
    cauchy_ok: bool

    def to_dict(self) -> dict:
        return {
            "gamma_limit": self.gamma_limit,
            "nearest_gamma": self.nearest_gamma,
            "distance": self.distance,
            "group_index": self.group_index,
            "cauchy_variation": self.cauchy_variation,
            "cauchy_ok": self.cauchy_ok,
        }


def frequency_limit(
    trace: FrequencyTrace,
    table: SpectrumTable,
    tolerance: float = FREQUENCY_TOLERANCE
) -> FrequencyLimit:
    """
    N at the last sample, checked for stability over the last decade of t
    and matched to the nearest eigenvalue group of the table.
    """
    if not trace.t[-1] <= 1e-3 * trace.t[0]:
        raise DomainError(
            f"Frequency limit needs t_end <= 1e-3 t_start, got t_end={trace.t[-1]:.3e}, t_start={trace.t[0]:.3e}"
        )
    N = trace.N
    if not np.isfinite(N[-1]):
        raise DomainError("Frequency undefined at the last sample (zero height)")

    last_decade = (trace.t <= 10.0 * trace.t[-1]) & np.isfinite(N)
    variation = float(N[last_decade].max() - N[last_decade].min())
    cauchy_ok = variation <= tolerance
    if not cauchy_ok:
        logger.warning(f"Frequency not Cauchy | variation={variation:.3e} | tolerance={tolerance:.1e}")

    gamma_limit = float(N[-1])
    gi, distance = table.nearest_group(gamma_limit)
    trace.gamma_limit = gamma_limit

    logger.info(
        f"Frequency limit | N_end={gamma_limit:.10f} | nearest_gamma={table.group_gammas[gi]:.10f} | "
        f"distance={distance:.3e} | multiplicity={table.multiplicity(gi)}"
    )
    return FrequencyLimit(gamma_limit=gamma_limit, nearest_gamma=float(table.group_gammas[gi]),
                          distance=distance, group_index=gi, cauchy_variation=variation,
                          cauchy_ok=cauchy_ok)


def frequency_lower_bound_ok(trace: FrequencyTrace, params: ModelParams) -> bool:
    """Every defined sample satisfies N > -(N+2-2s)/4."""
    finite = trace.N[np.isfinite(trace.N)]
    return bool(np.all(finite > -params.ou_shift))


def monotonicity_slack(trace: FrequencyTrace) -> float:
    """
    min_k N(t_k) - N(t_{k+1}) along decreasing t; non-negative when N is
    non-decreasing in t.
    """
    N = trace.N[np.isfinite(trace.N)]
    if N.size < 2:
        return 0.0
    return float(np.min(N[:-1] - N[1:]))


def is_monotone(trace: FrequencyTrace, slack: float = SLACK_TOLERANCE) -> bool:
    return monotonicity_slack(trace) >= -slack


# --------------------------------------------------
# 4. Backward uniqueness
# --------------------------------------------------

def backward_uniqueness_check(config: EvolutionConfig) -> bool:
    """
    Zero data must stay identically zero; nonzero data must keep H > 0 at
    every sample.
    """
    trace = evolve(config).trace
    if not np.any(np.asarray(config.initial)):
        ok = bool(np.all(trace.H == 0.0))
    else:
        ok = bool(np.all(trace.H > 0.0))
    logger.info(f"Backward uniqueness | zero_data={not np.any(config.initial)} | min_H={trace.H.min():.3e} | ok={ok}")
    return ok
