# Data/config_loader.py

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from config import (
    DEFAULT_SEED,
    J_MAX,
    MAX_LOG_STEP,
    MESH_ELEMENTS,
    N_MAX,
    PROJECT_ROOT,
    RESULTS_DIR,
    RTOL,
    SAMPLE_RATIO,
    TIE_TOLERANCE,
)
from pipeline_spectral.errors import ConfigValidationError, DomainError
from pipeline_spectral.model.params import ModelParams, validate_params
from pipeline_spectral.model.perturbation import PerturbationSpec, validate_perturbation
from pipeline_spectral.analyses.spherical_spectrum import MIN_INTERVALS, max_harmonic_degree

logger = logging.getLogger(__name__)

REQUIRED_SECTIONS = ("model", "sectors")
DEFAULT_TAU_GRID = (0.25, 1.0, 31)


@dataclass(frozen=True)
class EvolutionSettings:
    t_start: float
    t_end: float
    rtol: float = RTOL
    sample_ratio: float = SAMPLE_RATIO
    max_log_step: float = MAX_LOG_STEP
    initial: Dict[Tuple[int, int], float] = field(default_factory=dict)


@dataclass(frozen=True)
class RunConfig:
    """
    Validated run configuration.

    sectors maps harmonic degree l to the number of angular modes solved in
    that sector; initial data are keyed by (n, j).
    """
    params: ModelParams
    sectors: Dict[int, int]
    n_max: int = N_MAX
    j_max: Optional[int] = J_MAX
    mesh_elements: int = MESH_ELEMENTS
    mesh_grading: Optional[float] = None
    tie_tolerance: float = TIE_TOLERANCE
    perturbation: Optional[PerturbationSpec] = None
    evolution: Optional[EvolutionSettings] = None
    lambdas: Tuple[float, ...] = ()
    beta_Lambdas: Tuple[float, ...] = ()
    tau_grid: Tuple[float, float, int] = DEFAULT_TAU_GRID
    seed: int = DEFAULT_SEED
    jobs: int = 1
    output_dir: Path = RESULTS_DIR

    def to_dict(self) -> dict:
        evolution = None
        if self.evolution is not None:
            evolution = {
                "t_start": self.evolution.t_start,
                "t_end": self.evolution.t_end,
                "rtol": self.evolution.rtol,
                "sample_ratio": self.evolution.sample_ratio,
                "max_log_step": self.evolution.max_log_step,
                "initial": [{"n": n, "j": j, "value": v} for (n, j), v in sorted(self.evolution.initial.items())],
            }
        return {
            "model": {"N": self.params.N, "s": self.params.s, "mu": self.params.mu,
                      "mu_margin": self.params.mu_margin},
            "sectors": [{"l": l, "count": c} for l, c in sorted(self.sectors.items())],
            "basis": {"n_max": self.n_max, "j_max": self.j_max, "tie_tolerance": self.tie_tolerance},
            "mesh": {"elements": self.mesh_elements, "grading": self.mesh_grading},
            "perturbation": self.perturbation.to_dict() if self.perturbation is not None else None,
            "evolution": evolution,
            "lambdas": list(self.lambdas),
            "beta_Lambdas": list(self.beta_Lambdas),
            "tau_grid": list(self.tau_grid),
            "seed": self.seed,
            "jobs": self.jobs,
            "output_dir": str(self.output_dir),
        }


# --------------------------------------------------
# 1. Section parsers
# --------------------------------------------------

def _number(section: Dict[str, Any], key: str, default: Any = None, kind=float):
    value = section.get(key, default)
    if value is None:
        raise ConfigValidationError(f"Missing required field '{key}'")
    try:
        return kind(value)
    except (TypeError, ValueError) as exc:
        raise ConfigValidationError(f"Field '{key}' must be {kind.__name__}, got {value!r}") from exc


def _parse_model(raw: Dict[str, Any]) -> ModelParams:
    N = _number(raw, "N", kind=int)
    s = _number(raw, "s")
    mu = _number(raw, "mu", 0.0)
    margin = raw.get("mu_margin")
    params = ModelParams.create(N, s, mu, mu_margin=None if margin is None else float(margin), strict=False)

    report = validate_params(params)
    if not report.accepted:
        raise ConfigValidationError("Invalid model parameters: " + "; ".join(report.violations))
    return params


def _parse_sectors(raw: Any, N: int) -> Dict[int, int]:
    if isinstance(raw, dict):
        items = [(int(l), int(c)) for l, c in raw.items()]
    elif isinstance(raw, list):
        items = [(int(entry["l"]), int(entry["count"])) for entry in raw]
    else:
        raise ConfigValidationError("'sectors' must be a list of {l, count} or a mapping l -> count")
    if not items:
        raise ConfigValidationError("At least one sector is required")

    l_cap = max_harmonic_degree(N)
    sectors = {}
    for l, count in items:
        if l < 0 or count < 1:
            raise ConfigValidationError(f"Sector needs l >= 0 and count >= 1, got l={l}, count={count}")
        if l_cap is not None and l > l_cap:
            raise ConfigValidationError(f"N={N} admits harmonic degrees l <= {l_cap}, got l={l}")
        if l in sectors:
            raise ConfigValidationError(f"Sector l={l} listed twice")
        sectors[l] = count
    return sectors


def _parse_perturbation(raw: Optional[Dict[str, Any]], params: ModelParams) -> Optional[PerturbationSpec]:
    if raw is None:
        return None
    spec = PerturbationSpec(
        amplitude_A=_number(raw, "amplitude_A", 0.0),
        amplitude_B=_number(raw, "amplitude_B", 0.0),
        epsilon=_number(raw, "epsilon", 0.5),
        time_slope=_number(raw, "time_slope", 0.0),
        C_g=_number(raw, "C_g", 1.0),
    )
    violations = validate_perturbation(spec, params)
    if violations:
        raise ConfigValidationError("Invalid perturbation: " + "; ".join(violations))
    return spec


def _parse_evolution(raw: Optional[Dict[str, Any]]) -> Optional[EvolutionSettings]:
    if raw is None:
        return None
    initial = {}
    for entry in raw.get("initial", []):
        key = (int(entry["n"]), int(entry["j"]))
        initial[key] = float(entry["value"])

    settings = EvolutionSettings(
        t_start=_number(raw, "t_start", 1.0),
        t_end=_number(raw, "t_end"),
        rtol=_number(raw, "rtol", RTOL),
        sample_ratio=_number(raw, "sample_ratio", SAMPLE_RATIO),
        max_log_step=_number(raw, "max_log_step", MAX_LOG_STEP),
        initial=initial,
    )
    if not settings.t_end > 0.0:
        raise ConfigValidationError(f"t_end must be positive, got t_end={settings.t_end}")
    if not settings.t_end < settings.t_start:
        raise ConfigValidationError(
            f"t_end must be below t_start, got t_end={settings.t_end}, t_start={settings.t_start}"
        )
    if not 1e-14 < settings.rtol < 1e-3:
        raise ConfigValidationError(f"rtol must lie in (1e-14, 1e-3), got rtol={settings.rtol}")
    if not settings.sample_ratio > 1.0:
        raise ConfigValidationError(f"sample_ratio must exceed 1, got {settings.sample_ratio}")
    if not settings.max_log_step > 0.0:
        raise ConfigValidationError(f"max_log_step must be positive, got {settings.max_log_step}")
    return settings


def _parse_positive_list(raw: Any, name: str) -> Tuple[float, ...]:
    values = tuple(float(v) for v in (raw or []))
    if any(v <= 0.0 for v in values):
        raise ConfigValidationError(f"'{name}' must hold positive values, got {list(values)}")
    return values


def _parse_tau_grid(raw: Any) -> Tuple[float, float, int]:
    if raw is None:
        return DEFAULT_TAU_GRID
    try:
        lo, hi, points = float(raw[0]), float(raw[1]), int(raw[2])
    except (TypeError, ValueError, IndexError) as exc:
        raise ConfigValidationError(f"'tau_grid' must be [lo, hi, points], got {raw!r}") from exc
    if not (0.0 < lo < hi and points >= 2):
        raise ConfigValidationError(f"'tau_grid' needs 0 < lo < hi and points >= 2, got {raw!r}")
    return lo, hi, points


def _resolve_output(raw: Any) -> Path:
    """Relative output directories are taken from the project root."""
    path = RESULTS_DIR if raw is None else Path(raw)
    return path if path.is_absolute() else PROJECT_ROOT / path


# --------------------------------------------------
# 2. Loading
# --------------------------------------------------

def parse_run_config(raw: Dict[str, Any]) -> RunConfig:
    """Validate a decoded JSON document into a RunConfig."""
    if not isinstance(raw, dict):
        raise ConfigValidationError("Run configuration must be a JSON object")
    missing = [name for name in REQUIRED_SECTIONS if name not in raw]
    if missing:
        raise ConfigValidationError(f"Missing configuration sections: {missing}")

    try:
        params = _parse_model(raw["model"])
        sectors = _parse_sectors(raw["sectors"], params.N)

        basis = raw.get("basis", {})
        n_max = _number(basis, "n_max", N_MAX, kind=int)
        j_max = basis.get("j_max", J_MAX)
        j_max = None if j_max is None else int(j_max)
        tie_tolerance = _number(basis, "tie_tolerance", TIE_TOLERANCE)
        if n_max < 0:
            raise ConfigValidationError(f"n_max must be >= 0, got n_max={n_max}")
        if j_max is not None and j_max < 1:
            raise ConfigValidationError(f"j_max must be >= 1, got j_max={j_max}")

        mesh = raw.get("mesh", {})
        elements = _number(mesh, "elements", MESH_ELEMENTS, kind=int)
        if elements < MIN_INTERVALS:
            raise ConfigValidationError(f"Mesh needs at least {MIN_INTERVALS} elements, got {elements}")
        grading = mesh.get("grading")
        if grading is not None and not float(grading) >= 1.0:
            raise ConfigValidationError(f"Mesh grading exponent must be >= 1, got {grading}")

        config = RunConfig(
            params=params,
            sectors=sectors,
            n_max=n_max,
            j_max=j_max,
            mesh_elements=elements,
            mesh_grading=None if grading is None else float(grading),
            tie_tolerance=tie_tolerance,
            perturbation=_parse_perturbation(raw.get("perturbation"), params),
            evolution=_parse_evolution(raw.get("evolution")),
            lambdas=_parse_positive_list(raw.get("lambdas"), "lambdas"),
            beta_Lambdas=_parse_positive_list(raw.get("beta_Lambdas"), "beta_Lambdas"),
            tau_grid=_parse_tau_grid(raw.get("tau_grid")),
            seed=_number(raw, "seed", DEFAULT_SEED, kind=int),
            jobs=_number(raw, "jobs", 1, kind=int),
            output_dir=_resolve_output(raw.get("output_dir")),
        )
    except (KeyError, TypeError) as exc:
        raise ConfigValidationError(f"Malformed configuration entry: {exc}") from exc
    except DomainError as exc:
        raise ConfigValidationError(str(exc)) from exc

    return config


def load_run_config(path: str | Path, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """
    Load a JSON run configuration and apply CLI overrides.

    Parameters
    ----------
    path : str or Path
    overrides : dict, optional
        Values for output_dir, seed or jobs; None entries are ignored.

    Raises
    ------
    ConfigValidationError
        Unreadable file, malformed JSON or any violated invariant.
    """
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except OSError as exc:
        raise ConfigValidationError(f"Cannot read configuration {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigValidationError(f"Malformed JSON in {path}: {exc}") from exc

    config = parse_run_config(raw)

    updates = {k: v for k, v in (overrides or {}).items() if v is not None}
    unknown = set(updates) - {"output_dir", "seed", "jobs"}
    if unknown:
        raise ConfigValidationError(f"Unsupported overrides: {sorted(unknown)}")
    if "output_dir" in updates:
        updates["output_dir"] = Path(updates["output_dir"]).resolve()
    config = replace(config, **updates)

    if config.jobs == 0:
        raise ConfigValidationError("jobs must be nonzero (-1 uses every core)")

    logger.info(
        f"Config loaded | path={path.name} | N={config.params.N} | s={config.params.s} | "
        f"mu={config.params.mu:.6g} | sectors={dict(sorted(config.sectors.items()))} | "
        f"perturbed={config.perturbation is not None and not config.perturbation.is_trivial()}"
    )
    return config


def require_lambdas(config: RunConfig) -> List[float]:
    if not config.lambdas:
        raise ConfigValidationError("Blow-up analysis needs a nonempty 'lambdas' list")
    return list(config.lambdas)
