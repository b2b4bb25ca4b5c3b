"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class LevyOptStopError(Exception):
    """Base class for all library errors."""


class InvalidParameterError(LevyOptStopError, ValueError):
    """Model or contract parameters violate a precondition."""


class PoleProximityError(LevyOptStopError, ValueError):
    """Laplace exponent evaluated too close to its pole."""


class MissingPhiError(LevyOptStopError):
    """The right inverse of the Laplace exponent does not exist for this rate."""


class FinitenessError(LevyOptStopError):
    """The pricing problem is not well-posed (value may be infinite)."""


class OptimizerError(LevyOptStopError):
    """Boundary optimizer failed to converge; carries the best iterate found."""

    def __init__(self, message: str, best: tuple | None = None):
        super().__init__(message)
        self.best = best


class DomainError(LevyOptStopError, ValueError):
    """Argument outside the mathematical domain of an operation."""
