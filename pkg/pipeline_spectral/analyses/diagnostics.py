# Analyses/diagnostics.py

import logging
from typing import Sequence, Tuple

import numpy as np

from pipeline_spectral.errors import DomainError

logger = logging.getLogger(__name__)

# --------------------------------------------------
# 1. Mesh refinement
# --------------------------------------------------

def observed_order(coarse: float, medium: float, fine: float, ratio: float = 2.0) -> float:
    """
    Observed convergence order from three successively refined values.

    """
    num = coarse - medium
    den = medium - fine
    if den == 0.0 or num == 0.0 or num / den <= 0.0:
        return float("nan")
    return float(np.log(num / den) / np.log(ratio))


def richardson_extrapolate(
    coarse: float,
    medium: float,
    fine: float,
    ratio: float = 2.0,
    order: float | None = None
) -> Tuple[float, float]:
    """
    Richardson extrapolation of a quantity computed on meshes h, h/r, h/r^2.

    Returns (extrapolated value, order used). The order is estimated from
    the three values unless given.
    """
    p = observed_order(coarse, medium, fine, ratio) if order is None else order
    if not np.isfinite(p) or p <= 0.0:
        logger.warning(f"Richardson | non-monotone refinement | values=({coarse}, {medium}, {fine})")
        return float(fine), float("nan")
    factor = ratio ** p
    return float(fine + (fine - medium) / (factor - 1.0)), float(p)


# --------------------------------------------------
# 2. Log-log regression
# --------------------------------------------------

def loglog_fit(x: Sequence[float], y: Sequence[float]) -> Tuple[float, float, float]:
    """
    Least-squares line through (log x, log y).

    Returns slope, intercept and the RMS residual.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 3:
        raise DomainError(f"Log-log fit needs at least 3 points, got {x.size}")
    if np.any(x <= 0.0) or np.any(y <= 0.0):
        raise DomainError("Log-log fit needs positive data")

    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    residual = float(np.sqrt(np.mean((ly - (slope * lx + intercept)) ** 2)))
    return float(slope), float(intercept), residual


def relative_spread(values: Sequence[float]) -> float:
    """(max - min) / max |value|, 0 for an all-zero sample."""
    values = np.asarray(values, dtype=float)
    scale = np.max(np.abs(values))
    return float((values.max() - values.min()) / scale) if scale > 0.0 else 0.0
