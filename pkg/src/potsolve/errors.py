"""Exception hierarchy shared by all solver modules."""


class PotError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(PotError, ValueError):
    pass


class NegativeEntry(PotError, ValueError):
    pass


class NonFinite(PotError, ValueError):
    pass


class MassOutOfRange(PotError, ValueError):
    pass


class DummyCostTooSmall(PotError, ValueError):
    pass


class DegenerateMass(PotError, ValueError):
    pass


class SizeLimitExceeded(PotError, ValueError):
    pass


class InternalError(PotError, RuntimeError):
    """An internal mathematical guarantee was violated; indicates a bug."""


class LineSearchStall(PotError, RuntimeError):
    """The adaptive smoothness estimate exceeded its cap."""


class IterationBudgetExceeded(PotError, RuntimeError):
    """The computed iteration count exceeds the configured cap."""


class NotConverged(PotError, RuntimeError):
    """An iterative solver hit its iteration limit.

    Carries the last iterate so callers can inspect or reuse partial
    progress: ``iterate`` is solver specific, ``marginal_error`` is the
    stopping metric at the last iteration, ``report`` (when set by a
    wrapper) is a full SolveReport built from the last iterate.
    """

    def __init__(self, message, iterate=None, marginal_error=None, report=None):
        super().__init__(message)
        self.iterate = iterate
        self.marginal_error = marginal_error
        self.report = report
