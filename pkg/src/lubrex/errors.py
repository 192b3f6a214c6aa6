"""Exception and warning types shared across the package."""


class LubrexError(Exception):
    """Base class for domain errors (CLI exit status 3)."""


class ParseError(LubrexError, ValueError):
    pass


class NonPositiveShape(LubrexError, ValueError):
    pass


class ExceedsUnitHeight(LubrexError, ValueError):
    pass


class NotInBasis(LubrexError, KeyError):
    pass


class MissingPredecessor(LubrexError):
    pass


class QuadratureUnderResolved(LubrexError):
    pass


class OutOfStatedRange(LubrexError, ValueError):
    pass


class PointOutsideDomain(LubrexError, ValueError):
    pass


class BinomialDivergence(LubrexError, ValueError):
    pass


class BoundViolation(LubrexError):
    """A measured error exceeds its a priori bound."""


class SingularSystem(LubrexError):
    pass


class UnresolvedSolution(LubrexError):
    pass


class GridMismatch(LubrexError, ValueError):
    pass


class ValidityWarning(UserWarning):
    """Raised (as a warning) when eps exceeds r_0/3."""
