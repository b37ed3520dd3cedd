"""Exception types shared across the package.

Every failure mode that callers are expected to catch has its own class so
that pipelines can distinguish "the math said no" (e.g. NonConvergent on a
curve of unbounded variation) from caller mistakes (bad arguments) and from
numerical breakdown (lost brackets, stalled refinements).
"""


class CurvesmithError(Exception):
    """Base class for all package-specific errors."""


class OutOfDomain(CurvesmithError):
    """A parameter value lies outside the curve's domain."""


class InvalidParameter(CurvesmithError):
    """An argument fails validation (wrong sign, empty interval, ...)."""


class InvalidDescriptor(InvalidParameter):
    """A corpus descriptor does not name a constructible curve."""


class IntegrationFailure(CurvesmithError):
    """An ODE or quadrature routine failed to reach its tolerance."""


class NonConvergent(CurvesmithError):
    """A refinement scheme failed to stabilize within its depth budget.

    Carries the last estimate and the depth reached so callers can report
    partial evidence.
    """

    def __init__(self, message, estimate=None, depth=None):
        super().__init__(message)
        self.estimate = estimate
        self.depth = depth


class DegenerateComponent(CurvesmithError):
    """The curve is constant on a component where nonconstancy is required."""


class StallDetected(CurvesmithError):
    """An iterative sweep stopped making progress before its target."""


class RootNotBracketed(CurvesmithError):
    """A bisection was asked to solve an equation with no sign change."""


class CertificateFailure(CurvesmithError):
    """A partition failed its admissibility re-check.

    ``offenders`` lists (cell_index, reason) pairs.
    """

    def __init__(self, message, offenders=()):
        super().__init__(message)
        self.offenders = list(offenders)


class HypothesisViolated(CurvesmithError):
    """Inputs violate a construction lemma's smallness hypothesis."""


class PreconditionFailure(CurvesmithError):
    """A pipeline stage was invoked with its precondition unmet."""


class MonotonicityNotDetected(CurvesmithError):
    """No monotone curvature window was found near the requested endpoint."""
