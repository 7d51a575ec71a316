import mpmath
import numpy as np
import pytest
from scipy.special import binom, gammaln, hyperu

from pipeline_spectral.errors import DomainError, PoleError, UnsupportedParameterError
from pipeline_spectral.numerics.quadrature import gauss_laguerre_rule
from pipeline_spectral.numerics.special_functions import (
    gamma_fn,
    kummer_m,
    laguerre_gen,
    laguerre_gen_derivative,
    p_poly,
    pochhammer,
    tricomi_t,
)


# --------------------------------------------------
# Gamma and Pochhammer
# --------------------------------------------------

def test_gamma_recurrence():
    x = np.random.default_rng(0).uniform(0.05, 30.0, 1000)
    for value in x:
        assert gamma_fn(value + 1.0) == pytest.approx(value * gamma_fn(value), rel=1e-12)


def test_gamma_half():
    assert gamma_fn(0.5) == pytest.approx(np.sqrt(np.pi), rel=1e-15)


@pytest.mark.parametrize("x", [0.0, -1.0, -7.0])
def test_gamma_poles(x):
    with pytest.raises(PoleError):
        gamma_fn(x)


def test_gamma_overflow():
    with pytest.raises(DomainError):
        gamma_fn(200.0)


def test_pochhammer():
    assert pochhammer(7.3, 0) == 1.0
    assert pochhammer(2.0, 3) == 24.0
    assert pochhammer(-2.0, 3) == 0.0
    with pytest.raises(DomainError):
        pochhammer(1.0, -1)


# --------------------------------------------------
# Confluent hypergeometric functions
# --------------------------------------------------

def test_kummer_at_zero():
    assert kummer_m(0.3, 1.7, 0.0) == 1.0


def test_kummer_exponential():
    assert kummer_m(1.3, 1.3, 2.0) == pytest.approx(np.exp(2.0), rel=1e-14)


def test_kummer_terminating():
    assert kummer_m(-1.0, 3.0, 1.5) == pytest.approx(0.5, rel=1e-15)


@pytest.mark.parametrize("c", [-5.5, -20.5, -30.5])
@pytest.mark.parametrize("b", [1.5, 2.5])
@pytest.mark.parametrize("t", [10.0, 30.0, 50.0])
def test_kummer_negative_first_parameter_against_mpmath(c, b, t):
    with mpmath.workdps(60):
        expected = float(mpmath.hyp1f1(c, b, t))
    assert kummer_m(c, b, t) == pytest.approx(expected, rel=1e-11)


def test_kummer_alternating_series_value():
    assert kummer_m(-20.5, 1.5, 30.0) == pytest.approx(-16099.9025130, rel=1e-9)


def test_kummer_large_argument_asymptotics():
    c, b = 0.3, 1.7

    def defect(t):
        return np.log(kummer_m(c, b, t)) - t - (c - b) * np.log(t) - (gammaln(b) - gammaln(c))

    assert abs(defect(60.0)) < abs(defect(40.0)) < abs(defect(20.0))
    assert abs(defect(60.0)) < 0.05


def test_kummer_rejects_nonpositive_integer_b():
    with pytest.raises(UnsupportedParameterError):
        kummer_m(0.5, -2.0, 1.0)


def test_tricomi_zero_first_parameter():
    assert tricomi_t(0.0, 1.5, 2.0) == pytest.approx(1.0, rel=1e-14)


@pytest.mark.parametrize("c, b, t", [(1.0, 1.5, 4.0), (0.3, 1.7, 0.8), (-0.4, 0.6, 2.5)])
def test_tricomi_against_scipy(c, b, t):
    assert tricomi_t(c, b, t) == pytest.approx(hyperu(c, b, t), rel=1e-9)


def test_tricomi_small_argument_behaviour():
    c, b = 0.3, 1.7
    limit = gamma_fn(b - 1.0) / gamma_fn(c)
    assert 1e-10 ** (b - 1.0) * tricomi_t(c, b, 1e-10) == pytest.approx(limit, rel=1e-3)
    assert np.isfinite(tricomi_t(c, b, 1e-8))


def test_tricomi_rejects_integer_b():
    with pytest.raises(UnsupportedParameterError):
        tricomi_t(0.5, 2.0, 1.0)


# --------------------------------------------------
# Laguerre polynomials
# --------------------------------------------------

def test_laguerre_values():
    assert laguerre_gen(1, 2.0, 3.0) == pytest.approx(0.0, abs=1e-15)
    expected = binom(2.5, 2) * kummer_m(-2.0, 1.5, 1.0)
    assert laguerre_gen(2, 0.5, 1.0) == pytest.approx(expected, rel=1e-14)


def test_laguerre_orthogonality():
    a = 0.7
    rule = gauss_laguerre_rule(32, a)
    for n in range(6):
        for m in range(6):
            value = rule.integrate(lambda t: laguerre_gen(n, a, t) * laguerre_gen(m, a, t))
            expected = np.exp(gammaln(n + a + 1.0) - gammaln(n + 1.0)) if n == m else 0.0
            assert value == pytest.approx(expected, rel=1e-10, abs=1e-10)


def test_laguerre_derivative():
    t = np.linspace(0.1, 5.0, 9)
    step = 1e-6
    numeric = (laguerre_gen(4, 0.3, t + step) - laguerre_gen(4, 0.3, t - step)) / (2.0 * step)
    np.testing.assert_allclose(laguerre_gen_derivative(4, 0.3, t), numeric, rtol=1e-6, atol=1e-8)


def test_p_poly_values():
    assert p_poly(1, 2.5, 1.0) == pytest.approx(0.6, rel=1e-15)
    expected = laguerre_gen(3, 1.3, 1.7) / binom(4.3, 3)
    assert p_poly(3, 2.3, 1.7) == pytest.approx(expected, rel=1e-13)


def test_p_poly_is_degree_n():
    t = np.arange(6, dtype=float)
    values = p_poly(4, 1.8, t)
    assert values[0] == 1.0
    assert abs(np.diff(values, 5)[0]) <= 1e-9 * np.max(np.abs(values))


def test_p_poly_rejects_nonpositive_integer_parameter():
    with pytest.raises(UnsupportedParameterError):
        p_poly(2, 0.0, 1.0)
