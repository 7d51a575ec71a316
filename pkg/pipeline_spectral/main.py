import logging
import sys
import time
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np
import pandas as pd

# Add project root to path for config import
PROJECT_ROOT = Path(__file__).resolve().parent.parent
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from config import GRAM_TOLERANCE, SLACK_TOLERANCE

from pipeline_spectral.errors import (
    EXIT_PROPERTY_FAILURE,
    EXIT_SUCCESS,
    ConfigValidationError,
    SpectralSolverError,
    exit_code_for,
)

# --- Configuration ---
from pipeline_spectral.data.config_loader import RunConfig, require_lambdas

# --- Spectra ---
from pipeline_spectral.analyses.spherical_spectrum import solve_angular_spectrum, spectrum_frame
from pipeline_spectral.analyses.ou_spectrum import (
    SpectrumTable,
    build_spectrum,
    coercivity_estimate,
    eigen_residual_check,
    gaussian_gram_matrices,
)

# --- Inequalities ---
from pipeline_spectral.analyses.inequalities import run_inequality_suite

# --- Evolution ---
from pipeline_spectral.analyses.evolution import (
    EvolutionConfig,
    EvolutionResult,
    coefficients_from_mapping,
    evolve,
)
from pipeline_spectral.analyses.frequency import (
    fit_vanishing_order,
    frequency_limit,
    frequency_lower_bound_ok,
    is_monotone,
    monotonicity_slack,
    verify_h_prime,
)
from pipeline_spectral.analyses.blowup import (
    beta_coefficients,
    beta_spread,
    blowup_profile_error,
    trace_profile_error,
)

# --- Reporting ---
from pipeline_spectral.reporting.writers import write_csv, write_json

logger = logging.getLogger(__name__)

RESIDUAL_TOLERANCE = 1e-8
H_PRIME_TOLERANCE = {False: 1e-6, True: 1e-5}


# --------------------------------------------------
# 1. Shared builders
# --------------------------------------------------

def build_modes(config: RunConfig):
    return solve_angular_spectrum(config.params, config.sectors, config.mesh_elements,
                                  config.jobs, config.mesh_grading)


def build_table(config: RunConfig, modes) -> SpectrumTable:
    return build_spectrum(modes, config.n_max, config.params, config.tie_tolerance, config.j_max)


def _is_perturbed(config: RunConfig) -> bool:
    return config.perturbation is not None and not config.perturbation.is_trivial()


def _run_evolution(config: RunConfig, table: SpectrumTable) -> EvolutionResult:
    settings = config.evolution
    if settings is None:
        raise ConfigValidationError("This command needs an 'evolution' section")
    initial = coefficients_from_mapping(table, settings.initial)
    unknown = set(settings.initial) - {(e.n, e.j) for e in table.elements}
    if unknown:
        raise ConfigValidationError(f"Initial data reference elements outside the table: {sorted(unknown)}")
    if not np.any(initial):
        raise ConfigValidationError("Initial data must have at least one nonzero coefficient")

    return evolve(EvolutionConfig(
        params=config.params,
        table=table,
        pert=config.perturbation,
        t_start=settings.t_start,
        t_end=settings.t_end,
        initial=initial,
        rtol=settings.rtol,
        max_log_step=settings.max_log_step,
        sample_ratio=settings.sample_ratio,
    ))


def _execute(name: str, body: Callable[[RunConfig], int], config: RunConfig) -> int:
    logger.info(f"COMMAND START | {name}")
    t0 = time.perf_counter()
    try:
        code = body(config)
    except Exception as exc:
        code = exit_code_for(exc)
        logger.error(f"{name} failed | exit_code={code} | {type(exc).__name__}: {exc}")
        return code
    logger.info(f"COMMAND END | {name} | exit_code={code} | elapsed={time.perf_counter() - t0:.2f}s")
    return code


# --------------------------------------------------
# 2. spectrum
# --------------------------------------------------

def _spectrum(config: RunConfig) -> int:
    modes = build_modes(config)
    table = build_table(config, modes)

    alphas = {e.j: e.alpha for e in table.elements}
    out = config.output_dir
    write_csv(spectrum_frame(modes, [alphas.get(m.index_k, np.nan) for m in modes]), out / "angular_spectrum.csv")
    write_csv(table.to_frame(), out / "spectrum.csv")
    write_json({
        "params": config.params.to_dict(),
        "elements": table.to_records(),
        "groups": [{"gamma": float(table.group_gammas[gi]), "members": list(g)}
                   for gi, g in enumerate(table.groups)],
    }, out / "basis.json")
    return EXIT_SUCCESS


def cmd_spectrum(config: RunConfig) -> int:
    """Angular spectrum and OU basis: angular_spectrum.csv, spectrum.csv, basis.json."""
    return _execute("spectrum", _spectrum, config)


# --------------------------------------------------
# 3. evolve
# --------------------------------------------------

def _evolve(config: RunConfig) -> int:
    table = build_table(config, build_modes(config))
    result = _run_evolution(config, table)
    trace = result.trace

    summary = {
        "perturbed": _is_perturbed(config),
        "n_samples": trace.n_samples,
        "h_prime_defect": verify_h_prime(trace),
        "lower_bound_ok": frequency_lower_bound_ok(trace, config.params),
        "monotonicity_slack": monotonicity_slack(trace),
        "N_end": float(trace.N[-1]),
    }
    if trace.t[-1] <= 1e-3 * trace.t[0]:
        limit = frequency_limit(trace, table)
        summary["frequency_limit"] = limit.to_dict()
        fit = fit_vanishing_order(trace, (trace.t[-1], 10.0 * trace.t[-1]))
        summary["vanishing_order"] = {
            "gamma_fit": fit.gamma_fit,
            "residual": fit.residual,
            "ratio_spread": fit.ratio_spread,
            "window": list(trace.fit_window),
        }
    else:
        logger.warning("Evolution window shorter than three decades | frequency limit skipped")

    out = config.output_dir
    write_csv(trace.to_frame(), out / "trace.csv")
    write_json({"states": [s.to_dict() for s in result.states]}, out / "states.json")
    write_json(summary, out / "summary.json")
    return EXIT_SUCCESS


def cmd_evolve(config: RunConfig) -> int:
    """Galerkin evolution: trace.csv, states.json and summary.json."""
    return _execute("evolve", _evolve, config)


# --------------------------------------------------
# 4. blowup
# --------------------------------------------------

def _blowup(config: RunConfig) -> int:
    lambdas = require_lambdas(config)
    Lambdas = list(config.beta_Lambdas) or lambdas

    table = build_table(config, build_modes(config))
    result = _run_evolution(config, table)
    limit = frequency_limit(result.trace, table)
    forms = gaussian_gram_matrices(table)

    betas = [beta_coefficients(result, table, config.perturbation, L, limit.group_index) for L in Lambdas]
    spread = beta_spread(betas)

    lo, hi, points = config.tau_grid
    tau_grid = np.linspace(lo, hi, points)
    rows = []
    for lam in lambdas:
        err_H, err_L = blowup_profile_error(result, table, betas[0], forms, lam, tau_grid)
        err_trace = trace_profile_error(result, table, betas[0], forms, lam, tau_grid)
        rows.append({"lambda": lam, "err_H": err_H, "err_L": err_L, "err_trace": err_trace})

    out = config.output_dir
    write_json({
        "frequency_limit": limit.to_dict(),
        "betas": [b.to_dict(table) for b in betas],
        "relative_spread": spread,
        "nonzero": bool(any(np.any(b.values != 0.0) for b in betas)),
    }, out / "beta.json")
    write_csv(pd.DataFrame(rows), out / "profile_errors.csv")
    return EXIT_SUCCESS


def cmd_blowup(config: RunConfig) -> int:
    """Beta coefficients over the Lambda grid and profile errors over lambdas."""
    return _execute("blowup", _blowup, config)


# --------------------------------------------------
# 5. check
# --------------------------------------------------

def _item(name: str, value: float, threshold: Optional[float], passed: bool) -> Dict:
    return {"name": name, "value": value, "threshold": threshold, "passed": bool(passed)}


def _check(config: RunConfig) -> int:
    modes = build_modes(config)
    table = build_table(config, modes)
    forms = gaussian_gram_matrices(table)
    items: List[Dict] = []

    gram = float(np.max(np.abs(forms.mass - np.eye(table.size))))
    items.append(_item("gram_check", gram, GRAM_TOLERANCE, gram <= GRAM_TOLERANCE))

    residual = max(eigen_residual_check(e, table.elements, config.params) for e in table.elements)
    items.append(_item("eigen_residual", residual, RESIDUAL_TOLERANCE, residual <= RESIDUAL_TOLERANCE))

    nu_min = min(m.nu for m in modes)
    items.append(_item("nu_floor", nu_min, config.params.nu_floor, nu_min > config.params.nu_floor))

    try:
        coercivity = coercivity_estimate(table, forms)
        items.append(_item("coercivity", coercivity, 0.0, 0.0 < coercivity <= 1.0))
    except SpectralSolverError as exc:
        logger.error(f"Coercivity failed | {exc}")
        items.append(_item("coercivity", float("nan"), 0.0, False))

    for r in run_inequality_suite(table, forms, config.perturbation, seed=config.seed):
        items.append(_item(r.name, r.min_relative_slack, -r.tolerance, r.passed))

    if config.evolution is not None:
        result = _run_evolution(config, table)
        perturbed = _is_perturbed(config)
        defect = verify_h_prime(result.trace)
        items.append(_item("h_prime", defect, H_PRIME_TOLERANCE[perturbed], defect <= H_PRIME_TOLERANCE[perturbed]))
        items.append(_item("frequency_lower_bound", float(np.nanmin(result.trace.N)), -config.params.ou_shift,
                           frequency_lower_bound_ok(result.trace, config.params)))
        if not perturbed:
            items.append(_item("monotonicity", monotonicity_slack(result.trace), -SLACK_TOLERANCE,
                               is_monotone(result.trace)))

    failed = [i["name"] for i in items if not i["passed"]]
    write_json({"passed": not failed, "failed": failed, "items": items}, config.output_dir / "report.json")

    if failed:
        logger.error(f"Property failures | {', '.join(failed)}")
        return EXIT_PROPERTY_FAILURE
    logger.info(f"All properties hold | n_items={len(items)}")
    return EXIT_SUCCESS


def cmd_check(config: RunConfig) -> int:
    """Inequality and consistency suites; report.json, exit 1 on any failure."""
    return _execute("check", _check, config)


COMMANDS: Dict[str, Callable[[RunConfig], int]] = {
    "spectrum": cmd_spectrum,
    "evolve": cmd_evolve,
    "blowup": cmd_blowup,
    "check": cmd_check,
}
