"""Exception hierarchy shared by every module."""

from __future__ import annotations


class BarowError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(BarowError, ValueError):
    """An argument violates a documented precondition."""


class InvalidDataError(BarowError, ValueError):
    """Input data is malformed (non-finite values, shape mismatch)."""


class NumericalError(BarowError, ArithmeticError):
    """A factorization failed or a matrix is too close to singular."""


class RankDeficiencyError(NumericalError):
    """A least-squares design does not determine a unique solution."""


class ParseError(BarowError, ValueError):
    """A file does not conform to its documented schema."""

    def __init__(self, message: str, row: int | None = None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row
