"""Exception hierarchy shared across the package.

Exit-code mapping used by the CLI: UsageError -> 1, DataError -> 2,
NumericalError -> 3.
"""


class OrbitMocapError(Exception):
    """Base class for all package errors."""


class UsageError(OrbitMocapError):
    """Bad command-line usage or inconsistent configuration."""


class DataError(OrbitMocapError):
    """Malformed or inconsistent input data (files or in-memory)."""


class NumericalError(OrbitMocapError):
    """Numerical failure: divergence, rank loss, non-finite values."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else None
