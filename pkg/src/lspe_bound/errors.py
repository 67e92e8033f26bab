"""Exception types raised across the package."""


class LSPEError(Exception):
    """Base class for every error raised by lspe_bound."""


class NotStochastic(LSPEError, ValueError):
    pass


class NotIrreducible(LSPEError, ValueError):
    pass


class DimensionMismatch(LSPEError, ValueError):
    pass


class NotMixedByTmax(LSPEError, RuntimeError):
    pass


class InvalidState(LSPEError, ValueError):
    pass


class SingularB(LSPEError, ValueError):
    pass


class SingularA(LSPEError, ValueError):
    pass


class UnstableN(LSPEError, ValueError):
    pass


class NotPositiveDefinite(LSPEError, ValueError):
    pass


class InvalidSchedule(LSPEError, ValueError):
    pass


class NumericalBreakdown(LSPEError, FloatingPointError):
    pass


class HorizonTooLarge(LSPEError, ValueError):
    pass


class MissingConstant(LSPEError, KeyError):
    pass


class UnknownSelector(LSPEError, ValueError):
    pass


class ConditionViolated(LSPEError, ValueError):
    pass


class ParseError(LSPEError, ValueError):
    pass


class ConstraintError(LSPEError, ValueError):
    pass


class NonPlateau(UserWarning):
    """A numerically estimated constant has not settled by the end of its sweep."""
