"""Exception hierarchy shared by all solver layers."""


class EqmError(Exception):
    """Base class for every error raised by :mod:`eqm`."""


class NotOnCut(EqmError, ValueError):
    """A side-resolved boundary value was requested off every cut."""


class OnCut(EqmError, ValueError):
    """An off-cut quantity was requested at a point lying on a cut."""


class QuadratureStalled(EqmError):
    """Adaptive quadrature did not settle within the allowed doublings."""


class GapPathBlocked(EqmError):
    """No cut-avoiding route joins the two ends of a gap."""


class SolverError(EqmError):
    """Base class for Newton failures; carries the partial report if any."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NearSingularSystem(SolverError):
    pass


class NoConvergence(SolverError):
    pass


class CoalescingEndpoints(SolverError):
    pass


class BoundaryReached(SolverError):
    """Continuation step size underflowed; ``last_t`` is the last good point."""

    def __init__(self, message, last_t=None, path=None):
        super().__init__(message)
        self.last_t = last_t
        self.path = path


class LagrangeExtractionFailed(EqmError):
    pass


class TracingError(EqmError):
    """Step-size underflow, runaway trajectory or missing cut-avoiding path."""


class CensusViolation(EqmError):
    pass


class ResolutionInsufficient(EqmError):
    pass


class ConfigError(EqmError, ValueError):
    pass
