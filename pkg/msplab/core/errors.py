"""
Exception hierarchy.

Every error carries the process exit code the CLI reports for it.
"""

from typing import Optional


class MSPError(Exception):
    """Base class for all lab errors."""

    exit_code: int = 1

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class UsageError(MSPError):
    """Bad command line: unknown command, malformed flag values."""

    exit_code = 2


class InputError(MSPError):
    """Input data or arguments violate an operation's preconditions."""

    exit_code = 3


class ConfigurationError(InputError):
    """A model configuration violates one of its invariants."""


class MalformedFileError(InputError):
    """An artifact on disk is truncated, not JSON, or has the wrong schema."""


class NumericalError(MSPError):
    """Numerical or search failure."""

    exit_code = 4


class SearchSetupError(NumericalError):
    """The search could not be initialised (e.g. rejection sampling exhausted)."""


class OracleCapError(NumericalError):
    """Exhaustive enumeration refused because the feasible space is too large."""

    def __init__(self, count: int, cap: int):
        super().__init__(f"Feasible space has {count} individuals, above the cap of {cap}")
        self.count = count
        self.cap = cap


class UndefinedCorrelationError(NumericalError):
    """Correlation requested on a constant input."""


def describe(error: Exception, default_code: Optional[int] = None) -> tuple[int, str]:
    """Map an exception to (exit_code, message) for the CLI."""
    if isinstance(error, MSPError):
        return error.exit_code, error.detail
    return (default_code if default_code is not None else 1), str(error)
