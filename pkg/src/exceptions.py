"""Error hierarchy shared by the numerical pipelines and the CLI."""

from typing import Optional

import numpy as np


class FKDetError(Exception):
    """Base class for all library errors."""


class GroupError(FKDetError, ValueError):
    """Invalid group descriptor, element arity or schedule parameter."""


class ExpressionSyntaxError(FKDetError, ValueError):
    """Malformed ring expression, group spec or complex file."""

    def __init__(self, message: str, text: str = "", position: Optional[int] = None):
        self.text = text
        self.position = position
        if position is not None and text:
            message = f"{message} at position {position}\n  {text}\n  {' ' * position}^"
        super().__init__(message)


class UnknownVariableError(ExpressionSyntaxError):
    """Variable name not available for the group's rank."""


class ShapeError(FKDetError, ValueError):
    """Matrix shapes do not chain, or a square matrix was required."""


class DomainMismatchError(FKDetError, ValueError):
    """Operands live over different groups or in an unsupported coefficient domain."""


class RestrictionError(FKDetError, ValueError):
    """Finite-section request inconsistent with its inputs."""


class NotPositiveDefiniteError(FKDetError, np.linalg.LinAlgError):
    """Cholesky factorisation hit a non-positive pivot."""

    def __init__(self, message: str, order: int, pivot: float, singular: bool):
        self.order = order
        self.pivot = pivot
        self.singular = singular
        super().__init__(message)


class NotHermitianError(FKDetError, ValueError):
    """Matrix handed to a symmetric eigensolver is not Hermitian."""


class NotPositiveError(FKDetError, ValueError):
    """Operator declared positive has a clearly negative section eigenvalue."""


class ScheduleError(FKDetError, ValueError):
    """Empty Følner schedule or invalid regularisation list."""


class ComplexError(FKDetError, ValueError):
    """Chain complex fails validation or weak acyclicity."""
