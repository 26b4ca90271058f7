"""Exception types raised across the package."""


class CStarIndexError(Exception):
    """Base class for all package errors."""


class NotSelfAdjoint(CStarIndexError):
    pass


class GapTooSmall(CStarIndexError):
    """A rank decision could not be made with the required singular-value gap."""


class BudgetOverflow(CStarIndexError):
    """A product or word left the degree budget of the model."""


class NotInvariant(CStarIndexError):
    pass


class UnitarityViolated(CStarIndexError):
    pass


class CrossingUnresolved(CStarIndexError):
    """An eigenvalue stayed in the ambiguous band near zero after refinement."""


class NotScalar(CStarIndexError):
    pass


class PhaseUnwrapAmbiguous(CStarIndexError):
    pass


class NotProjection(CStarIndexError):
    pass


class Unstable(CStarIndexError):
    """An oracle value changed under enlargement of the truncation."""
