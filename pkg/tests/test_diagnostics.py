import numpy as np
import pytest

from pipeline_spectral.errors import DomainError
from pipeline_spectral.analyses.diagnostics import (
    loglog_fit,
    observed_order,
    relative_spread,
    richardson_extrapolate,
)


def _second_order(h):
    return 8.0 + 3.0 * h ** 2 + 0.5 * h ** 4


def test_observed_order_of_second_order_sequence():
    values = [_second_order(h) for h in (0.1, 0.05, 0.025)]
    assert observed_order(*values) == pytest.approx(2.0, abs=0.02)


def test_richardson_removes_leading_term():
    values = [_second_order(h) for h in (0.1, 0.05, 0.025)]
    extrapolated, order = richardson_extrapolate(*values, order=2.0)
    assert order == 2.0
    assert abs(extrapolated - 8.0) < 2e-6
    assert abs(extrapolated - 8.0) < abs(values[-1] - 8.0)


def test_richardson_non_monotone_refinement():
    value, order = richardson_extrapolate(1.0, 2.0, 1.5)
    assert value == 1.5
    assert np.isnan(order)


def test_loglog_fit_power_law():
    x = np.logspace(-4, -1, 20)
    slope, intercept, residual = loglog_fit(x, 3.0 * x ** 1.5)
    assert slope == pytest.approx(1.5, rel=1e-12)
    assert intercept == pytest.approx(np.log(3.0), rel=1e-12)
    assert residual < 1e-12


def test_loglog_fit_needs_positive_data():
    with pytest.raises(DomainError):
        loglog_fit([1.0, 2.0, 3.0], [1.0, -1.0, 2.0])
    with pytest.raises(DomainError):
        loglog_fit([1.0, 2.0], [1.0, 2.0])


def test_relative_spread():
    assert relative_spread([1.0, 1.01, 0.99]) == pytest.approx(0.02 / 1.01)
    assert relative_spread([0.0, 0.0]) == 0.0
