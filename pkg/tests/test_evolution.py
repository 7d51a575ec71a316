import numpy as np
import pytest

from pipeline_spectral.errors import DomainError, ZeroHeightError
from pipeline_spectral.model.perturbation import PerturbationSpec
from pipeline_spectral.analyses.evolution import (
    CouplingAssembler,
    EvolutionConfig,
    SpectralState,
    coefficients_from_mapping,
    coupling_matrix,
    dirichlet,
    evolve,
    frequency,
    height,
    sample_log_times,
    truncation_spillover,
)


# --------------------------------------------------
# Coupling matrix
# --------------------------------------------------

def test_trivial_perturbation_has_no_coupling(hardy_table):
    assert not np.any(coupling_matrix(hardy_table, None, 0.5))
    assert not np.any(coupling_matrix(hardy_table, PerturbationSpec(), 0.5))
    assert CouplingAssembler(hardy_table, PerturbationSpec()).is_trivial


@pytest.mark.parametrize("pert", [
    PerturbationSpec(amplitude_A=0.1, epsilon=0.5),
    PerturbationSpec(amplitude_A=0.3, amplitude_B=-0.2, epsilon=0.25, time_slope=1.0),
])
def test_laguerre_coupling_matches_graded_quadrature(hardy_table, pert):
    for t in (1e-4, 0.1, 1.0):
        exact = coupling_matrix(hardy_table, pert, t, method="laguerre")
        graded = coupling_matrix(hardy_table, pert, t, method="graded")
        np.testing.assert_allclose(exact, graded, rtol=1e-7, atol=1e-9 * np.max(np.abs(exact)))
        np.testing.assert_allclose(exact, exact.T, atol=1e-14 * np.max(np.abs(exact)))


def test_coupling_vanishes_as_time_shrinks(hardy_table, singular_perturbation):
    norms = [np.max(np.abs(coupling_matrix(hardy_table, singular_perturbation, t))) for t in (1e-2, 1e-4, 1e-6)]
    assert norms[0] > norms[1] > norms[2]
    # |M(t)| ~ t^{eps/2} for the singular term
    assert norms[1] / norms[2] == pytest.approx(10.0 ** 0.5, rel=0.05)


def test_coupling_requires_positive_time(hardy_table, singular_perturbation):
    with pytest.raises(DomainError):
        coupling_matrix(hardy_table, singular_perturbation, 0.0)


def test_unknown_coupling_method(hardy_table, singular_perturbation):
    with pytest.raises(DomainError):
        coupling_matrix(hardy_table, singular_perturbation, 0.1, method="spline")


# --------------------------------------------------
# States
# --------------------------------------------------

def test_height_dirichlet_frequency():
    state = SpectralState(t=0.01, coeffs=np.array([0.1, 0.001]))
    gammas = [0.5, 1.5]
    assert height(state) == pytest.approx(0.01 + 1e-6)
    assert state.t * dirichlet(state, None, gammas) == pytest.approx(0.5 * 0.01 + 1.5e-6)
    assert frequency(state, None, gammas) == pytest.approx(0.5001, abs=1e-4)


def test_equal_weights_average_gammas():
    state = SpectralState(t=1.0, coeffs=np.array([1.0, 1.0]))
    assert frequency(state, None, [0.5, 1.5]) == pytest.approx(1.0)


def test_zero_height_frequency():
    with pytest.raises(ZeroHeightError):
        frequency(SpectralState(t=1.0, coeffs=np.zeros(3)), None, [0.0, 1.0, 2.0])


def test_sample_log_times_end_exactly():
    taus = sample_log_times(1.0, 1e-4, 1.01)
    assert taus[0] == 0.0
    assert taus[-1] == np.log(1e-4)
    assert np.all(np.diff(taus) < 0.0)


def test_coefficients_from_mapping(reference_table):
    c = coefficients_from_mapping(reference_table, {(0, 2): 2.0})
    index = next(i for i, e in enumerate(reference_table.elements) if (e.n, e.j) == (0, 2))
    assert c[index] == 2.0
    assert np.count_nonzero(c) == 1


# --------------------------------------------------
# Galerkin evolution
# --------------------------------------------------

def test_config_validation(reference_table, reference_params):
    initial = np.ones(reference_table.size)
    with pytest.raises(DomainError):
        EvolutionConfig(params=reference_params, table=reference_table, pert=None,
                        t_start=1.0, t_end=1.0, initial=initial)
    with pytest.raises(DomainError):
        EvolutionConfig(params=reference_params, table=reference_table, pert=None,
                        t_start=1.0, t_end=0.1, initial=np.ones(3))


def test_unperturbed_power_law(reference_run, reference_table):
    times = reference_run.times
    c0 = reference_run.coefficients[0]
    exact = c0[None, :] * times[:, None] ** reference_table.gammas[None, :]
    active = c0 != 0.0
    np.testing.assert_allclose(reference_run.coefficients[:, active], exact[:, active], rtol=1e-8)
    assert not np.any(reference_run.coefficients[:, ~active])


def test_unperturbed_frequency_closed_form(reference_run, reference_table):
    g = {(e.n, e.j): e.gamma for e in reference_table.elements}
    g0, g1 = g[(0, 2)], g[(1, 2)]
    t = reference_run.trace.t
    expected = (g0 * t ** (2 * g0) + g1 * t ** (2 * g1)) / (t ** (2 * g0) + t ** (2 * g1))
    np.testing.assert_allclose(reference_run.trace.N, expected, rtol=1e-8)
    assert reference_run.trace.N[0] == pytest.approx(1.0, abs=1e-4)


def test_forcing_vanishes_without_perturbation(reference_run):
    assert not np.any(reference_run.forcing)


def test_perturbed_run_keeps_lower_bound(perturbed_run, hardy_params):
    N = perturbed_run.trace.N
    assert np.all(np.isfinite(N))
    assert np.all(N > -hardy_params.ou_shift)
    assert not perturbed_run.trace.lower_bound_violated


def test_trace_frame(reference_run):
    df = reference_run.trace.to_frame()
    assert list(df.columns) == ["t", "H", "D", "N"]
    assert len(df) == reference_run.trace.n_samples


def test_truncation_spillover(hardy_modes, hardy_params, singular_perturbation):
    base, enriched, diff = truncation_spillover(
        hardy_modes[:2], hardy_params, 2, singular_perturbation, {(0, 1): 1.0}, 1.0, 1e-8
    )
    assert diff == pytest.approx(abs(enriched - base))
    assert diff <= 1e-3


def test_zero_initial_data_stays_zero(hardy_table, hardy_params, singular_perturbation):
    config = EvolutionConfig(params=hardy_params, table=hardy_table, pert=singular_perturbation,
                             t_start=1.0, t_end=1e-2, initial=np.zeros(hardy_table.size))
    result = evolve(config)
    assert np.all(result.trace.H == 0.0)
    assert np.all(np.isnan(result.trace.N))
