"""
Error types for spinboson-spectrum

This module defines the exception hierarchy shared by the numerical modules
and the command-line front end, together with the helper that turns any
exception into the single-line error report the CLI writes on stderr.
"""
from typing import Any, Dict

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


class SpinBosonError(Exception):
    """Base class for every error raised by the library."""

    exit_code = EXIT_NUMERICAL


# Validation errors: the input does not describe an admissible model or call

class ModelValidationError(SpinBosonError):
    exit_code = EXIT_VALIDATION


class ZeroCoupling(ModelValidationError):
    """The coupling function vanishes almost everywhere."""


class BoundedDispersion(ModelValidationError):
    """The dispersion relation fails the unboundedness sample test."""


class NegativeEpsilon(ModelValidationError):
    """The atom level epsilon is not strictly positive."""


class ModelFileError(ModelValidationError):
    """A model file has unknown, missing or malformed fields."""


class DomainError(SpinBosonError, ValueError):
    """An operation was called outside of its domain of definition."""

    exit_code = EXIT_VALIDATION


# Numerical failures

class NumericalError(SpinBosonError):
    exit_code = EXIT_NUMERICAL


class NonFiniteIntegrand(NumericalError):
    pass


class NoConvergence(NumericalError):
    """Adaptive refinement hit the node cap before two estimates agreed."""


class DivergentIntegral(NumericalError):
    pass


class BracketFailure(NumericalError):
    """No sign change of a monotone function was found in the search range."""


class NonPositiveDelta(NumericalError):
    pass


class NoCluster(NumericalError):
    pass


class IntegrabilityWarning(UserWarning):
    """The declared integrability flag disagrees with the dyadic probe."""


def to_error_dict(exc: BaseException) -> Dict[str, Any]:
    """
    Render an exception as a machine-parsable error report.

    Args:
        exc: The exception to report

    Returns:
        Dict with the error class name, message and process exit code
    """
    exit_code = getattr(exc, "exit_code", EXIT_NUMERICAL)
    return {
        "error": type(exc).__name__,
        "message": str(exc),
        "exit_code": exit_code,
    }
