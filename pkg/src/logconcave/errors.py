"""Exception hierarchy."""


class LogConcaveError(Exception):
    """Base class for all errors raised by this package."""


class InvalidData(LogConcaveError, ValueError):
    pass


class DegenerateSample(LogConcaveError, ValueError):
    """Fewer than two distinct observations."""


class InvalidParams(LogConcaveError, ValueError):
    pass


class SolverFailure(LogConcaveError, RuntimeError):
    """The objective became nonfinite at a feasible iterate."""


class OutOfSupport(LogConcaveError, ValueError):
    pass


class DegenerateMixture(LogConcaveError, RuntimeError):
    """Every EM restart collapsed a component."""
