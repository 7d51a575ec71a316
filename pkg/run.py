#!/usr/bin/env python3
"""
Main entry point of the spectral lab.

Validates the environment, loads a JSON run configuration and runs one of
the commands of pipeline_spectral.

Usage:
    python run.py spectrum --config pipeline_spectral/configs/reference_mu0.json
    python run.py evolve   --config <path> --output <dir>
    python run.py blowup   --config <path>
    python run.py check    --config <path> --seed 7 --jobs 4
"""

import sys
import argparse
import logging

# Logging is configured before any pipeline import
logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s | %(levelname)-8s | %(message)s",
    datefmt="%Y-%m-%d %H:%M:%S"
)
logger = logging.getLogger(__name__)

COMMAND_NAMES = ("spectrum", "evolve", "blowup", "check")


def validate_environment(config_path):
    """
    Check that the project layout and the requested configuration exist.

    Returns
    -------
    bool
        True when the environment is usable.
    """
    from config import PROJECT_ROOT, PIPELINE_SPECTRAL_DIR, CONFIGS_DIR

    errors = []

    if not PROJECT_ROOT.exists():
        errors.append(f"Project root not found: {PROJECT_ROOT}")

    main_py = PIPELINE_SPECTRAL_DIR / "main.py"
    if not main_py.exists():
        errors.append(f"Pipeline entry point not found: {main_py}")

    if not CONFIGS_DIR.exists():
        errors.append(f"Configuration directory not found: {CONFIGS_DIR}")

    if not config_path.exists():
        errors.append(f"Run configuration not found: {config_path}")

    if errors:
        logger.error("Environment validation failed:")
        for error in errors:
            logger.error(f"  - {error}")
        return False

    logger.info("Environment validation passed")
    return True


def check_dependencies():
    """
    Check that the scientific stack is importable.

    Returns
    -------
    bool
        True when every required module imports.
    """
    required_modules = [
        'numpy',
        'scipy',
        'pandas',
        'mpmath',
        'joblib'
    ]

    missing = []
    for module in required_modules:
        try:
            __import__(module)
        except ImportError:
            missing.append(module)

    if missing:
        logger.error(f"Missing modules: {', '.join(missing)}")
        logger.error("Install them with: pip install -r requirements.txt")
        return False

    logger.info("All dependencies are available")
    return True


def run_command(name, config_path, overrides):
    """
    Load the configuration and run one command.

    Returns
    -------
    int
        Exit code: 0 success, 1 property failure, 2 validation,
        3 spectral solver, 4 evolution.
    """
    from config import PROJECT_ROOT
    if str(PROJECT_ROOT) not in sys.path:
        sys.path.insert(0, str(PROJECT_ROOT))

    from pipeline_spectral.errors import EXIT_VALIDATION, ConfigValidationError
    from pipeline_spectral.data.config_loader import load_run_config
    from pipeline_spectral.main import COMMANDS

    logger.info("=" * 60)
    logger.info(f"COMMAND {name.upper()}")
    logger.info("=" * 60)

    try:
        config = load_run_config(config_path, overrides)
    except ConfigValidationError as e:
        logger.error("=" * 60)
        logger.error("INVALID CONFIGURATION")
        logger.error("=" * 60)
        logger.error(str(e))
        return EXIT_VALIDATION

    code = COMMANDS[name](config)

    logger.info("=" * 60)
    if code == 0:
        logger.info(f"COMMAND {name.upper()} COMPLETED | outputs={config.output_dir}")
    else:
        logger.error(f"COMMAND {name.upper()} FAILED | exit_code={code}")
    logger.info("=" * 60)
    return code


def build_parser():
    from config import DEFAULT_CONFIG_PATH

    parser = argparse.ArgumentParser(
        description="Spectral analysis of fractional heat equations with a Hardy potential"
    )
    parser.add_argument(
        'command',
        choices=COMMAND_NAMES,
        help='Command to run'
    )
    parser.add_argument(
        '--config',
        default=str(DEFAULT_CONFIG_PATH),
        help=f'JSON run configuration. Default: {DEFAULT_CONFIG_PATH.name}'
    )
    parser.add_argument('--output', default=None, help='Output directory (overrides the config)')
    parser.add_argument('--seed', type=int, default=None, help='Seed of the random test families')
    parser.add_argument('--jobs', type=int, default=None, help='Parallel workers for the sector solves')
    return parser


def main(argv=None):
    """
    Main execution function.
    """
    from pathlib import Path

    args = build_parser().parse_args(argv)
    config_path = Path(args.config)

    if not validate_environment(config_path):
        logger.error("The environment is not configured correctly.")
        return 2

    if not check_dependencies():
        logger.error("Dependencies are missing.")
        return 2

    overrides = {"output_dir": args.output, "seed": args.seed, "jobs": args.jobs}
    return run_command(args.command, config_path, overrides)


if __name__ == "__main__":
    exit_code = main()
    sys.exit(exit_code)
