"""Exception types shared across the package.

The CLI maps each family to an exit code: usage errors to 1, data
errors to 2, numerical failures to 3.
"""


class CTPError(Exception):
    """Base class for all package errors."""

    exit_code = 3


class UsageError(CTPError):
    exit_code = 1


class DataError(CTPError):
    """Bad or insufficient input data (unreadable file, gaps, short history)."""

    exit_code = 2


class NumericalError(CTPError):
    exit_code = 3


class DegenerateSeriesError(NumericalError):
    """The series has no variance left to model (e.g. constant prices)."""


class InfeasibleError(NumericalError):
    """No point satisfying the trade constraints could be produced."""
