import sys
from pathlib import Path

import pytest

PROJECT_ROOT = Path(__file__).resolve().parent.parent
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from pipeline_spectral.model.params import ModelParams
from pipeline_spectral.model.perturbation import PerturbationSpec
from pipeline_spectral.analyses.spherical_spectrum import solve_angular_spectrum
from pipeline_spectral.analyses.ou_spectrum import build_spectrum, gaussian_gram_matrices
from pipeline_spectral.analyses.evolution import EvolutionConfig, coefficients_from_mapping, evolve


# Harmonic sectors of the N=3, s=1/2, mu=0 reference case; the exact angular
# eigenvalues there are l0: {0, 8, 24}, l1: {3, 15, 35}, l2: {8, 24}.
REFERENCE_SECTORS = {0: 3, 1: 3, 2: 2}


@pytest.fixture(scope="session")
def reference_params():
    return ModelParams.create(3, 0.5, 0.0)


@pytest.fixture(scope="session")
def reference_modes(reference_params):
    return solve_angular_spectrum(reference_params, REFERENCE_SECTORS, n_elements=400)


@pytest.fixture(scope="session")
def reference_table(reference_modes, reference_params):
    return build_spectrum(reference_modes, 6, reference_params, j_max=4)


@pytest.fixture(scope="session")
def reference_forms(reference_table):
    return gaussian_gram_matrices(reference_table)


@pytest.fixture(scope="session")
def hardy_params():
    return ModelParams.create(3, 0.5, 0.3)


@pytest.fixture(scope="session")
def hardy_modes(hardy_params):
    return solve_angular_spectrum(hardy_params, {0: 2, 1: 1, 2: 1}, n_elements=200)


@pytest.fixture(scope="session")
def hardy_table(hardy_modes, hardy_params):
    return build_spectrum(hardy_modes, 2, hardy_params, j_max=2)


@pytest.fixture(scope="session")
def hardy_forms(hardy_table):
    return gaussian_gram_matrices(hardy_table)


@pytest.fixture
def singular_perturbation():
    return PerturbationSpec(amplitude_A=0.1, amplitude_B=0.0, epsilon=0.5)


# --------------------------------------------------
# Evolution runs shared by the frequency and blow-up tests
# --------------------------------------------------

@pytest.fixture(scope="session")
def reference_run(reference_table, reference_params):
    """Two modes of gamma 1/2 and 3/2, no perturbation, t from 1 down to 1e-4."""
    initial = coefficients_from_mapping(reference_table, {(0, 2): 1.0, (1, 2): 1.0})
    config = EvolutionConfig(params=reference_params, table=reference_table, pert=None,
                             t_start=1.0, t_end=1e-4, initial=initial)
    return evolve(config)


@pytest.fixture(scope="session")
def perturbed_run(hardy_table, hardy_params):
    pert = PerturbationSpec(amplitude_A=0.1, amplitude_B=0.0, epsilon=0.5)
    initial = coefficients_from_mapping(hardy_table, {(0, 1): 1.0, (1, 1): 0.5, (0, 2): 0.3})
    config = EvolutionConfig(params=hardy_params, table=hardy_table, pert=pert,
                             t_start=1.0, t_end=1e-10, initial=initial)
    return evolve(config)
