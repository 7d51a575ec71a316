import numpy as np
import pytest

from pipeline_spectral.errors import DomainError
from pipeline_spectral.model.perturbation import PerturbationSpec
from pipeline_spectral.analyses.evolution import EvolutionConfig, FrequencyTrace
from pipeline_spectral.analyses.frequency import (
    backward_uniqueness_check,
    fit_vanishing_order,
    frequency_limit,
    frequency_lower_bound_ok,
    is_monotone,
    monotonicity_slack,
    verify_h_prime,
)


# --------------------------------------------------
# Unperturbed run
# --------------------------------------------------

def test_h_prime_unperturbed(reference_run):
    assert verify_h_prime(reference_run.trace) <= 1e-6


def test_monotone_unperturbed(reference_run):
    assert monotonicity_slack(reference_run.trace) >= -1e-9
    assert is_monotone(reference_run.trace)


def test_limit_is_smallest_active_gamma(reference_run, reference_table):
    limit = frequency_limit(reference_run.trace, reference_table)
    gamma_active = next(e.gamma for e in reference_table.elements if (e.n, e.j) == (0, 2))
    assert limit.nearest_gamma == pytest.approx(gamma_active, abs=1e-12)
    assert limit.cauchy_ok
    # N(t) - gamma_0 = (gamma_1 - gamma_0) t^2 / (1 + t^2) at t = 1e-4
    assert limit.gamma_limit - gamma_active == pytest.approx(1e-8, rel=1e-3)
    assert reference_run.trace.gamma_limit == limit.gamma_limit


def test_vanishing_order_unperturbed(reference_run, reference_table):
    limit = frequency_limit(reference_run.trace, reference_table)
    fit = fit_vanishing_order(reference_run.trace, (1e-4, 1e-3))
    assert fit.gamma_fit == pytest.approx(limit.gamma_limit, abs=5e-3)
    assert fit.ratio_min > 0.0
    assert fit.ratio_spread <= 1.01
    assert reference_run.trace.fit_window[0] == pytest.approx(1e-4)


def test_frequency_limit_needs_three_decades(reference_table):
    trace = FrequencyTrace(t=np.logspace(0, -2, 50), H=np.ones(50), D=np.ones(50), N=np.ones(50))
    with pytest.raises(DomainError):
        frequency_limit(trace, reference_table)


def test_fit_window_needs_samples(reference_run):
    with pytest.raises(DomainError):
        fit_vanishing_order(reference_run.trace, (1e-8, 1e-7))


def test_h_prime_needs_five_samples():
    trace = FrequencyTrace(t=np.array([1.0, 0.5, 0.25]), H=np.ones(3), D=np.ones(3), N=np.ones(3))
    with pytest.raises(DomainError):
        verify_h_prime(trace)


# --------------------------------------------------
# Perturbed run
# --------------------------------------------------

def test_h_prime_perturbed(perturbed_run):
    assert verify_h_prime(perturbed_run.trace) <= 1e-5


def test_perturbed_limit_near_an_eigenvalue(perturbed_run, hardy_table, hardy_params):
    limit = frequency_limit(perturbed_run.trace, hardy_table)
    assert limit.distance <= 1e-3
    assert limit.group_index == 0
    assert frequency_lower_bound_ok(perturbed_run.trace, hardy_params)


def test_vanishing_order_perturbed(perturbed_run, hardy_table):
    limit = frequency_limit(perturbed_run.trace, hardy_table)
    fit = fit_vanishing_order(perturbed_run.trace, (1e-10, 1e-9))
    assert fit.gamma_fit == pytest.approx(limit.gamma_limit, abs=5e-3)
    assert fit.ratio_spread <= 1.2


# --------------------------------------------------
# Backward uniqueness
# --------------------------------------------------

def _config(table, params, initial):
    return EvolutionConfig(params=params, table=table, pert=PerturbationSpec(amplitude_A=0.1, epsilon=0.5),
                           t_start=1.0, t_end=1e-3, initial=initial, sample_ratio=1.05)


def test_zero_data_stays_zero(hardy_table, hardy_params):
    assert backward_uniqueness_check(_config(hardy_table, hardy_params, np.zeros(hardy_table.size)))


def test_nonzero_data_keeps_positive_height(hardy_table, hardy_params):
    rng = np.random.default_rng(20221210)
    for _ in range(20):
        initial = rng.standard_normal(hardy_table.size) * (rng.random(hardy_table.size) < 0.6)
        if not np.any(initial):
            initial[0] = 1.0
        assert backward_uniqueness_check(_config(hardy_table, hardy_params, initial))
