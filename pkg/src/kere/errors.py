"""Exception hierarchy shared by every kere module."""


class KereError(Exception):
    """Base class for all kere errors."""


class SurfaceMismatch(KereError):
    pass


class EmptyInput(KereError):
    pass


class NoLift(KereError):
    pass


class NonIntegerHolonomy(KereError):
    pass


class NonTrivialHomology(KereError):
    pass


class NotDegreeOne(KereError):
    pass


class DivergenceToPole(KereError):
    pass


class NotFound(KereError):
    pass


class BudgetExceeded(KereError):
    pass


class NotStationary(KereError):
    pass


class ChainStuck(KereError):
    def __init__(self, message, level=None, gap=None):
        super().__init__(message)
        self.level = level
        self.gap = gap


class ResidualTooLarge(KereError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class PreconditionError(KereError):
    """An operation was called on a map outside its domain of validity."""


class ContinuityGapAtHalf(KereError):
    pass


class ThetaCommutationFailure(KereError):
    pass


class ConfigError(KereError):
    """Invalid job configuration or map document."""
