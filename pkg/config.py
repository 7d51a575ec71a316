from pathlib import Path

# Project roots

# fractional-hardy-spectral-lab/
PROJECT_ROOT = Path(__file__).resolve().parent

# fractional-hardy-spectral-lab/pipeline_spectral/
PIPELINE_SPECTRAL_DIR = PROJECT_ROOT / "pipeline_spectral"

# Run configurations

CONFIGS_DIR = PIPELINE_SPECTRAL_DIR / "configs"
DEFAULT_CONFIG_PATH = CONFIGS_DIR / "default.json"
REFERENCE_CONFIG_PATH = CONFIGS_DIR / "reference_mu0.json"

# Results

RESULTS_DIR = PROJECT_ROOT / "outputs"

# Reproducibility

DEFAULT_SEED = 20221210

# Model

MU_MARGIN_FRACTION = 1e-6

# Quadrature

LAGUERRE_ORDER = 64
JACOBI_ORDER = 64
TRACE_PANELS = 40
TRACE_GRADING = 2.0
TRACE_PANEL_ORDER = 16
TRACE_TAIL_TOLERANCE = 1e-14
ELEMENT_QUADRATURE_ORDER = 8

# Angular problem

MESH_ELEMENTS = 400
L_MAX = 4

# Ornstein-Uhlenbeck basis

N_MAX = 8
J_MAX = 4
TIE_TOLERANCE = 1e-8

# Evolution

RTOL = 1e-10
MAX_LOG_STEP = 0.05
COUPLING_REFRESH = 0.02
SAMPLE_RATIO = 1.01
FREQUENCY_TOLERANCE = 1e-3
BETA_SPREAD_TOLERANCE = 1e-2

# Property suites

RANDOM_FAMILY_SIZE = 100
SLACK_TOLERANCE = 1e-9
GRAM_TOLERANCE = 1e-8
