"""Exception types shared across the toolkit."""


class MotskitError(Exception):
    """Base class for all toolkit errors."""


class InvalidParameter(MotskitError):
    """A constructor or config parameter is out of its physical range."""


class DomainError(MotskitError):
    """A point lies outside the chart domain or inside a puncture guard."""


class SingularMetric(MotskitError):
    """The metric is not invertible (or not positive definite) at a point."""


class DegenerateMetric(MotskitError):
    """The induced 2-metric is degenerate at a surface node."""


class OffsetOutOfDomain(MotskitError):
    """A normally offset surface left the chart domain."""


class NotAMOTS(MotskitError):
    """The deformation oracle was asked for a surface with nonzero expansion."""


class NoConvergence(MotskitError):
    """Newton search did not reach the residual tolerance.

    On data without a MOTS this is the correct signal, not a bug.
    """


class DivergingProfile(NoConvergence):
    """The radial profile left the chart domain during the Newton search."""


class EigensolverFailure(MotskitError):
    """The dense eigensolver failed or returned an invalid decomposition."""


class ZeroCandidate(MotskitError):
    """A kernel candidate was identically zero."""


class NotEinstein(MotskitError):
    """The slice failed the Einstein-manifold gate R_ab = lambda h_ab."""


class MissingAccelerationData(MotskitError):
    """The initial data set carries no normal-derivative (acceleration) field."""


class GateNotMet(MotskitError):
    """A verifier gate (e.g. nowhere-zero normal component) failed."""
