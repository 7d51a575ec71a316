import numpy as np
import pytest

from pipeline_spectral.errors import DomainError, SingularityError
from pipeline_spectral.model.params import ModelParams
from pipeline_spectral.model.perturbation import (
    PerturbationSpec,
    check_subhomogeneous_bound,
    perturbation_eval,
    perturbation_radial_derivative,
    validate_perturbation,
)

PARAMS = ModelParams.create(3, 0.5)


def test_smooth_term_at_origin():
    spec = PerturbationSpec(amplitude_A=0.0, amplitude_B=1.0)
    assert perturbation_eval(spec, 0.0, 0.0, PARAMS) == pytest.approx(1.0)


def test_singular_term_at_unit_radius():
    spec = PerturbationSpec(amplitude_A=1.0, epsilon=0.5)
    assert perturbation_eval(spec, 1.0, 0.0, PARAMS) == pytest.approx(np.exp(-1.0), rel=1e-14)


def test_time_dependent_value():
    spec = PerturbationSpec(amplitude_A=1.0, amplitude_B=2.0, epsilon=0.5, time_slope=1.0)
    expected = 1.5 * (0.5 + 2.0) * np.exp(-16.0)
    assert perturbation_eval(spec, 4.0, 0.5, PARAMS) == pytest.approx(expected, rel=1e-13)


def test_singular_term_rejects_origin():
    spec = PerturbationSpec(amplitude_A=1.0)
    with pytest.raises(SingularityError):
        perturbation_eval(spec, np.array([0.0, 1.0]), 0.0, PARAMS)


def test_negative_radius_rejected():
    with pytest.raises(DomainError):
        perturbation_eval(PerturbationSpec(amplitude_B=1.0), -0.1, 0.0, PARAMS)


def test_gaussian_decay():
    spec = PerturbationSpec(amplitude_A=0.1)
    assert perturbation_eval(spec, 10.0, 0.0, PARAMS) < 1e-30 * perturbation_eval(spec, 1.0, 0.0, PARAMS)


def test_radial_derivative_matches_finite_differences():
    spec = PerturbationSpec(amplitude_A=0.7, amplitude_B=-0.4, time_slope=0.3)
    r = np.linspace(0.2, 3.0, 15)
    step = 1e-6
    numeric = r * (perturbation_eval(spec, r + step, 0.4, PARAMS)
                   - perturbation_eval(spec, r - step, 0.4, PARAMS)) / (2.0 * step)
    exact = perturbation_radial_derivative(spec, r, 0.4, PARAMS)
    np.testing.assert_allclose(exact, numeric, rtol=1e-6, atol=1e-9)


# --------------------------------------------------
# Subhomogeneous bound
# --------------------------------------------------

RADII = np.logspace(-4, 1, 200)
TIMES = np.linspace(0.0, 1.0, 5)


def test_bound_holds_for_unit_singular_amplitude():
    result = check_subhomogeneous_bound(PerturbationSpec(amplitude_A=1.0), PARAMS, RADII, TIMES)
    assert result.ok
    assert result.max_ratio <= 1.0


def test_bound_fails_for_double_amplitude():
    result = check_subhomogeneous_bound(PerturbationSpec(amplitude_A=2.0), PARAMS, [0.1], [0.0])
    assert not result.ok
    assert result.max_ratio == pytest.approx(2.0 * np.exp(-0.01) * 0.1 ** -0.5 / (1.0 + 0.1 ** -0.5), rel=1e-12)


def test_bound_fails_for_large_smooth_amplitude():
    result = check_subhomogeneous_bound(PerturbationSpec(amplitude_B=5.0), PARAMS, RADII, TIMES)
    assert not result.ok
    assert result.max_ratio > 1.5


def test_gradient_term_increases_ratio():
    spec = PerturbationSpec(amplitude_A=0.5)
    plain = check_subhomogeneous_bound(spec, PARAMS, RADII, TIMES)
    with_gradient = check_subhomogeneous_bound(spec, PARAMS, RADII, TIMES, include_gradient=True)
    assert with_gradient.max_ratio >= plain.max_ratio


def test_bound_needs_nonempty_grid():
    with pytest.raises(DomainError):
        check_subhomogeneous_bound(PerturbationSpec(amplitude_A=1.0), PARAMS, [], [0.0])


def test_validate_perturbation():
    assert validate_perturbation(PerturbationSpec(amplitude_A=1.0, epsilon=0.5), PARAMS) == []
    violations = validate_perturbation(PerturbationSpec(amplitude_A=1.0, epsilon=1.0, C_g=0.0), PARAMS)
    assert len(violations) == 2


@pytest.mark.parametrize("spec, s, expected", [
    (PerturbationSpec(amplitude_A=0.1, epsilon=0.5), 0.5, 0.25),
    (PerturbationSpec(amplitude_A=0.1, amplitude_B=2.0, epsilon=0.3), 0.4, 0.15),
    (PerturbationSpec(amplitude_B=0.1, epsilon=0.5), 0.4, 0.4),
])
def test_decay_rate(spec, s, expected):
    assert spec.decay_rate(s) == pytest.approx(expected)
