"""Exception types raised by the sampling library."""
from typing import Optional


class GmrfError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgumentError(GmrfError, ValueError):
    """An argument violates a documented precondition."""


class NotPositiveDefiniteError(GmrfError):
    """Cholesky factorization met a non-positive pivot."""

    def __init__(self, pivot: int, value: Optional[float] = None):
        self.pivot = pivot
        self.value = value
        detail = f" (pivot value {value:.3e})" if value is not None else ""
        super().__init__(f"Matrix is not positive definite at pivot {pivot}{detail}")


class SingularFactorError(GmrfError):
    """A triangular factor has a zero on its diagonal."""

    def __init__(self, index: int):
        self.index = index
        super().__init__(f"Triangular factor is singular: zero diagonal at row {index}")


class UndefinedVarianceError(GmrfError):
    """A chain has zero variance, so autocorrelations are undefined."""


class ChainFileError(GmrfError):
    """A chain CSV could not be parsed."""

    def __init__(self, path: str, line: Optional[int], message: str):
        self.path = path
        self.line = line
        where = f"{path}:{line}" if line is not None else path
        super().__init__(f"{where}: {message}")
