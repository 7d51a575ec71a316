import numpy as np
import pytest

from config import GRAM_TOLERANCE
from pipeline_spectral.errors import DomainError, SingularityError
from pipeline_spectral.model.params import ModelParams
from pipeline_spectral.analyses.ou_spectrum import (
    alpha_exponent,
    build_spectrum,
    coercivity_estimate,
    eigen_residual_check,
    eval_eigenfunction,
    gram_check,
    normalization_constant,
    pair_forms,
)

PARAMS = ModelParams.create(3, 0.5)


# --------------------------------------------------
# Exponents and normalization
# --------------------------------------------------

@pytest.mark.parametrize("nu, alpha", [(0.0, 0.0), (3.0, -1.0), (8.0, -2.0), (15.0, -3.0)])
def test_alpha_exponent_reference_values(nu, alpha):
    assert alpha_exponent(nu, PARAMS) == pytest.approx(alpha, abs=1e-14)


def test_alpha_exponent_below_floor():
    with pytest.raises(DomainError):
        alpha_exponent(PARAMS.nu_floor, PARAMS)


def test_normalization_of_ground_state():
    # ||1||^2 in Gaussian space is 2^{N+1-2s} Gamma((N-2s)/2 + 1) for a unit angular profile
    assert normalization_constant(0, PARAMS.half_gap, 0.0, PARAMS) == pytest.approx(np.sqrt(8.0), rel=1e-14)


def test_normalization_rejects_bad_parameter():
    with pytest.raises(DomainError):
        normalization_constant(1, -1.0, 0.0, PARAMS)


# --------------------------------------------------
# Spectrum table
# --------------------------------------------------

def test_reference_gammas(reference_table):
    by_index = {(e.n, e.j): e.gamma for e in reference_table.elements}
    for n in range(3):
        assert by_index[(n, 1)] == pytest.approx(n, abs=1e-8)
        assert by_index[(n, 2)] == pytest.approx(n + 0.5, abs=1e-4)
        assert by_index[(n, 3)] == pytest.approx(n + 1.0, abs=1e-4)
        assert by_index[(n, 4)] == pytest.approx(n + 1.0, abs=1e-4)


def test_table_sorted_and_sized(reference_table):
    assert reference_table.size == 7 * 4
    assert np.all(np.diff(reference_table.gammas) >= 0.0)
    members = sorted(i for g in reference_table.groups for i in g)
    assert members == list(range(reference_table.size))


def test_loose_tolerance_groups_near_ties(reference_modes, reference_params):
    table = build_spectrum(reference_modes, 2, reference_params, tie_tolerance=1e-3, j_max=4)
    gi, distance = table.nearest_group(1.0)
    assert distance <= 1e-3
    assert table.multiplicity(gi) == 3
    assert {(table.elements[i].n, table.elements[i].j) for i in table.groups[gi]} == {(1, 1), (0, 3), (0, 4)}


def test_build_spectrum_rejects_negative_degree(reference_modes, reference_params):
    with pytest.raises(DomainError):
        build_spectrum(reference_modes, -1, reference_params)


def test_table_frame_has_groups(reference_table):
    df = reference_table.to_frame()
    assert {"n", "j", "l", "gamma", "norm_const", "group"} <= set(df.columns)
    assert len(df) == reference_table.size


# --------------------------------------------------
# Gaussian-space forms
# --------------------------------------------------

def test_gram_matrix_is_identity(reference_forms, reference_table):
    assert np.max(np.abs(reference_forms.mass - np.eye(reference_table.size))) <= GRAM_TOLERANCE


def test_gram_check_with_hardy_term(hardy_table):
    assert gram_check(hardy_table) <= GRAM_TOLERANCE


def test_forms_are_symmetric(reference_forms):
    for matrix in (reference_forms.dirichlet, reference_forms.inverse_square, reference_forms.trace,
                   reference_forms.weighted_trace, reference_forms.second_moment):
        np.testing.assert_allclose(matrix, matrix.T, atol=1e-12 * np.max(np.abs(matrix)))


def test_dirichlet_is_diagonal_without_hardy_term(reference_forms, reference_table):
    np.testing.assert_allclose(reference_forms.dirichlet, np.diag(reference_table.gammas), atol=1e-8)


def test_different_degrees_do_not_interact(reference_table, reference_params):
    elements = reference_table.elements
    a = next(e for e in elements if e.l == 0)
    b = next(e for e in elements if e.l == 1)
    assert all(value == 0.0 for value in pair_forms(a, b, reference_params).values())


@pytest.mark.parametrize("fixture", ["reference_table", "hardy_table"])
def test_weak_eigen_residual(request, fixture):
    table = request.getfixturevalue(fixture)
    worst = max(eigen_residual_check(e, table.elements, table.params) for e in table.elements)
    assert worst <= 1e-8


def test_coercivity_without_hardy_term(reference_table, reference_forms):
    assert coercivity_estimate(reference_table, reference_forms) == pytest.approx(1.0, abs=1e-8)


def test_coercivity_with_hardy_term(hardy_table, hardy_forms):
    value = coercivity_estimate(hardy_table, hardy_forms)
    assert 0.0 < value < 1.0


# --------------------------------------------------
# Pointwise evaluation
# --------------------------------------------------

def test_ground_state_is_constant(reference_table, reference_params):
    element = next(e for e in reference_table.elements if e.n == 0 and e.j == 1)
    r = np.linspace(0.1, 3.0, 7)
    values = eval_eigenfunction(element, r, 0.4, reference_params)
    np.testing.assert_allclose(values, values[0], rtol=1e-7)


def test_singular_eigenfunction_at_origin(hardy_table, hardy_params):
    element = next(e for e in hardy_table.elements if e.j == 1)
    assert element.alpha > 0.0
    with pytest.raises(SingularityError):
        eval_eigenfunction(element, 0.0, 0.3, hardy_params)
