"""
Exception hierarchy of the spectral pipeline.

Domain and parameter problems derive from ValueError, numerical
failures from RuntimeError. run.py maps each family to an exit code.
"""


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class PoleError(DomainError):
    """Gamma-type function evaluated at a pole."""


class SingularityError(DomainError):
    """Evaluation at the singular point r = 0 of a singular function."""


class UnsupportedParameterError(DomainError):
    """Parameter combination outside the implemented branch."""


class NonIntegrableSingularityError(DomainError):
    """Radial integrand too singular at the origin to be integrable."""


class ConfigValidationError(ValueError):
    """Run configuration violates the schema or a module invariant."""


class ConvergenceError(RuntimeError):
    """Iterative numerical kernel did not converge."""


class SpectralSolverError(RuntimeError):
    """Angular or Ornstein-Uhlenbeck spectral computation failed."""


class EvolutionError(RuntimeError):
    """Galerkin time integration failed."""


class InsufficientResolutionError(EvolutionError):
    """Stored states do not resolve the requested time window."""


class ZeroHeightError(ValueError):
    """Frequency requested for a state with vanishing height."""


EXIT_SUCCESS = 0
EXIT_PROPERTY_FAILURE = 1
EXIT_VALIDATION = 2
EXIT_SPECTRAL = 3
EXIT_EVOLUTION = 4


def exit_code_for(exc: BaseException) -> int:
    """Exit code associated with an exception raised by a command."""
    if isinstance(exc, (ConfigValidationError, DomainError)):
        return EXIT_VALIDATION
    if isinstance(exc, (SpectralSolverError, ConvergenceError)):
        return EXIT_SPECTRAL
    if isinstance(exc, EvolutionError):
        return EXIT_EVOLUTION
    return EXIT_PROPERTY_FAILURE
