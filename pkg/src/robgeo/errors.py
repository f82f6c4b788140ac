"""Exception types raised across the package."""


class RobgeoError(Exception):
    """Base class for package errors."""


class DomainError(RobgeoError, ValueError):
    """An argument lies outside the domain of a function."""


class StripError(DomainError):
    """A complex argument lies outside the supported strip ``|Im z| <= 30``."""


class ConvergenceError(RobgeoError, ArithmeticError):
    """An iterative method hit its iteration cap."""


class CutLocusError(RobgeoError, ValueError):
    """A logarithm or transport was requested at or beyond the cut locus.

    ``index`` identifies the offending row of a batched call, when known.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class ManifoldMismatchError(RobgeoError, ValueError):
    """Arrays do not have the shape or type the manifold expects."""


class DegenerateShapeError(DomainError):
    """A landmark configuration collapses to a single point."""
