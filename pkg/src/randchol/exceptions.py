"""Custom exceptions for the randchol solver toolkit."""

from typing import Any


class RandcholError(Exception):
    """Base exception for all randchol errors."""

    def __init__(
        self,
        message: str,
        context: str | None = None,
        details: Any | None = None,
    ) -> None:
        """Initialize RandcholError.

        Args:
            message: The error message.
            context: Short tag naming the operation that failed, if applicable.
            details: Additional data describing the failure (indices, values).
        """
        super().__init__(message)
        self.message = message
        self.context = context
        self.details = details

    def __str__(self) -> str:
        """Return a string representation of the error."""
        if self.context:
            return f"[{self.context}] {self.message}"
        return self.message


class DimensionMismatchError(RandcholError):
    """Raised when operand sizes disagree."""

    pass


class MatrixFormatError(RandcholError):
    """Raised when a matrix is malformed, out of range or not symmetric."""

    pass


class ZeroPivotError(RandcholError):
    """Raised when a triangular solve meets a zero or negative diagonal."""

    pass


class ClassificationError(RandcholError):
    """Raised when a matrix does not belong to the class an operation needs."""

    pass


class FactorizationError(RandcholError):
    """Raised when randomized elimination cannot proceed."""

    pass


class OrderingError(RandcholError):
    """Raised for invalid orderings, permutation files or ND trees."""

    pass


class IndefinitePreconditionerError(RandcholError):
    """Raised when PCG detects a preconditioner that is not positive."""

    pass


class ConfigError(RandcholError):
    """Raised when a configuration file or environment variable cannot be used."""

    pass
