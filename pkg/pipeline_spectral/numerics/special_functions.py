# Numerics/special_functions.py

import logging
from dataclasses import dataclass
from typing import Tuple

import mpmath
import numpy as np
from scipy.special import binom, gamma, hyp1f1, rgamma

from pipeline_spectral.errors import DomainError, PoleError, UnsupportedParameterError

logger = logging.getLogger(__name__)

GAMMA_OVERFLOW = 171.62
KUMMER_SERIES_LIMIT = 50.0
KUMMER_STOP = 1e-17
KUMMER_MAX_TERMS = 2000
KUMMER_CANCELLATION = 1e3
KUMMER_GUARD_DIGITS = 20


def _is_nonpositive_integer(x: float) -> bool:
    return x <= 0.0 and float(x).is_integer()


# --------------------------------------------------
# 1. Gamma and Pochhammer
# --------------------------------------------------

def gamma_fn(x: float) -> float:
    """
    Gamma function with explicit pole and overflow checks.

    Parameters
    ----------
    x : float
        Argument, not a non-positive integer.

    Returns
    -------
    float
        Gamma(x).
    """
    x = float(x)
    if _is_nonpositive_integer(x):
        raise PoleError(f"Gamma has a pole at x={x}")
    if x > GAMMA_OVERFLOW:
        raise DomainError(f"Gamma overflows double precision at x={x}")
    value = float(gamma(x))
    if not np.isfinite(value):
        raise DomainError(f"Gamma is not representable at x={x}")
    return value


def pochhammer(x: float, i: int) -> float:
    """Rising factorial (x)_i = x (x+1) ... (x+i-1), with (x)_0 = 1."""
    if i < 0:
        raise DomainError(f"Pochhammer index must be >= 0, got i={i}")
    result = 1.0
    for j in range(i):
        result *= x + j
    return result


# --------------------------------------------------
# 2. Confluent hypergeometric functions
# --------------------------------------------------

@dataclass(frozen=True)
class KummerParams:
    c: float
    b: float
    t: float

    def __post_init__(self):
        if _is_nonpositive_integer(self.b):
            raise UnsupportedParameterError(
                f"Kummer series undefined for non-positive integer b={self.b}"
            )
        if self.t < 0.0:
            raise DomainError(f"Kummer argument must be >= 0, got t={self.t}")


def _kummer_series(c: float, b: float, t: float) -> Tuple[float, float]:
    """Taylor sum of M(c, b, t) and the sum of the absolute values of its terms."""
    term = 1.0
    total = 1.0
    magnitude = 1.0
    for n in range(KUMMER_MAX_TERMS):
        term *= (c + n) / (b + n) * t / (n + 1)
        total += term
        magnitude += abs(term)
        if term == 0.0 or abs(term) <= KUMMER_STOP * abs(total):
            return total, magnitude
    logger.warning(f"Kummer series truncated | c={c} | b={b} | t={t} | n_terms={KUMMER_MAX_TERMS}")
    return total, magnitude


def _kummer_extended(c: float, b: float, t: float, cancellation: float) -> float:
    """M(c, b, t) in extended precision, with enough digits to absorb the cancellation."""
    digits = KUMMER_GUARD_DIGITS + int(np.ceil(np.log10(cancellation)))
    with mpmath.workdps(digits):
        return float(mpmath.hyp1f1(mpmath.mpf(c), mpmath.mpf(b), mpmath.mpf(t)))


def kummer_m(c: float, b: float, t: float) -> float:
    """
    Kummer's function M(c, b, t) = sum_n (c)_n / (b)_n t^n / n!.

    Taylor series up to t = 50, scipy's hyp1f1 beyond. For negative c the
    terms alternate in sign; once sum |term| / |M| exceeds
    KUMMER_CANCELLATION the double-precision sum has lost too many digits
    and the value is recomputed with mpmath.
    """
    p = KummerParams(float(c), float(b), float(t))
    if p.t > KUMMER_SERIES_LIMIT and not _is_nonpositive_integer(p.c):
        return float(hyp1f1(p.c, p.b, p.t))

    total, magnitude = _kummer_series(p.c, p.b, p.t)
    cancellation = magnitude / abs(total) if total != 0.0 else np.inf
    if cancellation <= KUMMER_CANCELLATION:
        return total

    cancellation = min(cancellation, magnitude / np.finfo(float).tiny)
    logger.debug(f"Kummer cancellation | c={p.c} | b={p.b} | t={p.t} | ratio={cancellation:.3e}")
    return _kummer_extended(p.c, p.b, p.t, cancellation)


def tricomi_t(c: float, b: float, t: float) -> float:
    """
    Tricomi's function through the two-term connection formula

        T(c,b,t) = Gamma(1-b)/Gamma(c-b+1) M(c,b,t)
                   + Gamma(b-1)/Gamma(c) t^{1-b} M(c-b+1, 2-b, t).

    Only non-integer b is supported.
    """
    c, b, t = float(c), float(b), float(t)
    if b.is_integer():
        raise UnsupportedParameterError(
            f"Tricomi connection formula degenerates for integer b={b}"
        )
    if t <= 0.0:
        raise DomainError(f"Tricomi argument must be positive, got t={t}")

    first = gamma_fn(1.0 - b) * float(rgamma(c - b + 1.0)) * kummer_m(c, b, t)
    second = gamma_fn(b - 1.0) * float(rgamma(c)) * t ** (1.0 - b) * kummer_m(c - b + 1.0, 2.0 - b, t)
    return first + second


# --------------------------------------------------
# 3. Laguerre polynomials and P_{j,n}
# --------------------------------------------------

def laguerre_gen(n: int, a: float, t):
    """
    Generalized Laguerre polynomial L_n^a(t) via

        (k+1) L_{k+1} = (2k+1+a-t) L_k - (k+a) L_{k-1}.

    t may be a scalar or an array.
    """
    if n < 0:
        raise DomainError(f"Laguerre degree must be >= 0, got n={n}")
    if a <= -1.0:
        raise DomainError(f"Laguerre parameter must exceed -1, got a={a}")

    t_arr = np.asarray(t, dtype=float)
    prev = np.ones_like(t_arr)
    if n == 0:
        return float(prev) if prev.ndim == 0 else prev
    curr = 1.0 + a - t_arr
    for k in range(1, n):
        prev, curr = curr, ((2 * k + 1 + a - t_arr) * curr - (k + a) * prev) / (k + 1)
    return float(curr) if curr.ndim == 0 else curr


def laguerre_gen_derivative(n: int, a: float, t):
    """d/dt L_n^a(t) = -L_{n-1}^{a+1}(t)."""
    if n == 0:
        t_arr = np.asarray(t, dtype=float)
        zero = np.zeros_like(t_arr)
        return float(zero) if zero.ndim == 0 else zero
    return -laguerre_gen(n - 1, a + 1.0, t)


def laguerre_binomial(n: int, a: float) -> float:
    """binom(n+a, n), the value of L_n^a at t = 0."""
    return float(binom(n + a, n))


def p_poly(n: int, b_param: float, t):
    """
    Finite sum P(t) = sum_{i<=n} (-n)_i / (b_param)_i t^i / i!.

    Equals L_n^a(t) / binom(n+a, n) with a = b_param - 1.
    """
    if n < 0:
        raise DomainError(f"Polynomial degree must be >= 0, got n={n}")
    if b_param <= 0.0 and float(b_param).is_integer():
        raise UnsupportedParameterError(f"b_param must not be a non-positive integer, got {b_param}")

    t_arr = np.asarray(t, dtype=float)
    term = np.ones_like(t_arr)
    total = np.ones_like(t_arr)
    for i in range(n):
        term = term * (-n + i) / (b_param + i) * t_arr / (i + 1)
        total = total + term
    return float(total) if total.ndim == 0 else total
