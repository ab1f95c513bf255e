"""Exception types mapped to CLI exit codes."""


class QblpError(Exception):
    """Base class for errors raised by this package."""


class DataError(QblpError):
    """Malformed input data or an inconsistent design request (exit code 3)."""


class NumericalError(QblpError):
    """Numerical failure such as a singular or indefinite matrix (exit code 4)."""
