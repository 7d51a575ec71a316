import numpy as np
import pytest
from scipy.special import gamma

from pipeline_spectral.errors import DomainError
from pipeline_spectral.model.params import (
    GaussianKernel,
    ModelParams,
    compute_constants,
    unit_sphere_area,
    validate_params,
)


# --------------------------------------------------
# Closed-form constants
# --------------------------------------------------

def test_constants_three_dimensions_half_order():
    kappa, lam = compute_constants(3, 0.5)
    assert kappa == pytest.approx(1.0, rel=1e-14)
    assert lam == pytest.approx(2.0 / np.pi, rel=1e-13)


def test_constants_four_dimensions_half_order():
    _, lam = compute_constants(4, 0.5)
    assert lam == pytest.approx(0.5, rel=1e-13)


def test_constants_two_dimensions_against_gamma():
    _, lam = compute_constants(2, 0.5)
    expected = 2.0 * (gamma(0.75) / gamma(0.25)) ** 2
    assert lam == pytest.approx(expected, rel=1e-13)
    assert lam == pytest.approx(0.2285, abs=1e-4)


@pytest.mark.parametrize("N, s", [(3, 0.0), (3, 1.0), (1, 0.6), (0, 0.3)])
def test_constants_outside_domain(N, s):
    with pytest.raises(DomainError):
        compute_constants(N, s)


def test_unit_sphere_area():
    assert unit_sphere_area(0) == pytest.approx(2.0)
    assert unit_sphere_area(1) == pytest.approx(2.0 * np.pi)
    assert unit_sphere_area(2) == pytest.approx(4.0 * np.pi)


# --------------------------------------------------
# Validation
# --------------------------------------------------

def test_validate_accepts_subcritical_mu():
    report = validate_params(ModelParams.create(3, 0.5, 0.3))
    assert report.accepted
    assert report.violations == []


def test_validate_rejects_dimension_below_order():
    params = ModelParams.create(1, 0.6, 0.0, strict=False)
    report = validate_params(params)
    assert not report.accepted
    assert any("N > 2s" in v for v in report.violations)


def test_validate_rejects_critical_mu():
    params = ModelParams.create(3, 0.5)
    report = validate_params(params.with_mu(params.hardy_threshold))
    assert not report.accepted
    assert any("mu <=" in v for v in report.violations)


def test_validate_rejects_tampered_constants():
    params = ModelParams.create(3, 0.5)
    tampered = ModelParams(N=3, s=0.5, mu=0.0, kappa_s=params.kappa_s * 1.01,
                           lambda_Ns=params.lambda_Ns, mu_margin=params.mu_margin)
    report = validate_params(tampered)
    assert not report.accepted
    assert any("kappa_s mismatch" in v for v in report.violations)


def test_derived_quantities():
    params = ModelParams.create(3, 0.5, 0.2)
    assert params.half_gap == pytest.approx(1.0)
    assert params.nu_floor == pytest.approx(-1.0)
    assert params.ou_shift == pytest.approx(1.0)
    assert params.hardy_threshold == pytest.approx(2.0 / np.pi)
    assert params.to_dict()["mu"] == pytest.approx(0.2)


# --------------------------------------------------
# Gaussian kernel
# --------------------------------------------------

def _halfspace_points(dim, count, seed=3):
    rng = np.random.default_rng(seed)
    z = rng.uniform(-2.0, 2.0, size=(count, dim))
    z[:, -1] = rng.uniform(0.1, 2.0, size=count)
    return z


@pytest.mark.parametrize("s", [0.25, 0.5, 0.8])
def test_kernel_gradient_matches_finite_differences(s):
    kernel = GaussianKernel(ModelParams.create(3, s))
    z = _halfspace_points(4, 20)
    exact = kernel.gradient(z, 0.7)
    approx = kernel.finite_difference_gradient(z, 0.7)
    assert np.max(np.abs(exact - approx)) <= 1e-6 * np.max(np.abs(exact))


@pytest.mark.parametrize("N, s", [(3, 0.5), (2, 0.3), (4, 0.75)])
def test_kernel_solves_weighted_heat_equation(N, s):
    kernel = GaussianKernel(ModelParams.create(N, s))
    z = _halfspace_points(N + 1, 30)
    for t in (0.3, 1.0, 2.5):
        residual = kernel.heat_residual(z, t)
        y = z[:, -1]
        r2 = np.sum(z ** 2, axis=-1)
        scale = y ** (1.0 - 2.0 * s) * kernel.value(z, t) * (kernel.exponent / t + r2 / t ** 2 + (N + 1) / t)
        assert np.max(np.abs(residual)) <= 1e-12 * np.max(scale)


def test_kernel_rejects_nonpositive_time():
    kernel = GaussianKernel(ModelParams.create(3, 0.5))
    with pytest.raises(DomainError):
        kernel.value(np.zeros((1, 4)), 0.0)
