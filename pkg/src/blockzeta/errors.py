"""Exception types raised by the evaluation engines."""


class BlockZetaError(Exception):
    """Base class for all package errors."""


class ParameterError(BlockZetaError, ValueError):
    """Raised for invalid evaluation parameters or schedule orderings."""


class DomainError(BlockZetaError, ValueError):
    """Raised when an argument lies outside the domain of an operation."""


class TableError(BlockZetaError, ValueError):
    """Raised when a coefficient table is too small for a request."""


class ConsistencyError(BlockZetaError, RuntimeError):
    """Raised when an internal self-check fails."""
