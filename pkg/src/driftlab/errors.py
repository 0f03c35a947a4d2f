"""Exception hierarchy shared across driftlab."""


class DriftlabError(Exception):
    """Base class for all driftlab errors."""


class ConfigError(DriftlabError, ValueError):
    """A scenario, profile or nonlinearity specification is malformed."""


class ParseError(ConfigError):
    """An expression string could not be parsed.

    ``offset`` is the character position where parsing failed.
    """

    def __init__(self, message, offset=None, source=None):
        self.offset = offset
        self.source = source
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)


# geometry
class InvalidWarp(ConfigError):
    pass


class DimensionConvention(ConfigError):
    pass


class OutOfDomain(DriftlabError, ValueError):
    pass


class GridTooCoarse(DriftlabError, ValueError):
    pass


class HypothesisUnverified(DriftlabError):
    """A curvature or structural hypothesis of an estimate could not be certified."""


class NeedFiniteM(HypothesisUnverified):
    pass


# nonlinearity
class DomainViolation(DriftlabError, ValueError):
    pass


class NonPositiveSolution(DriftlabError, ValueError):
    pass


class BoundViolated(DriftlabError, ValueError):
    pass


class ParameterOrder(DriftlabError, ValueError):
    pass


class UnknownPredicate(DriftlabError, KeyError):
    pass


# cutoff
class BadWindow(DriftlabError, ValueError):
    pass


# solver
class SolverAbort(DriftlabError):
    """Base class for errors that stop a time integration."""


class PositivityLost(SolverAbort):
    def __init__(self, message, r=None, t=None):
        self.r = r
        self.t = t
        super().__init__(message)


class BlowUp(SolverAbort):
    pass


class CFLFailure(SolverAbort):
    pass


class NoConvergence(SolverAbort):
    pass


# estimates
class NotSameRay(DriftlabError, ValueError):
    pass


class MissingCalibration(DriftlabError, ValueError):
    pass


class TimeOrder(DriftlabError, ValueError):
    pass


class NotStationary(DriftlabError, ValueError):
    pass


class MixedKinds(DriftlabError, ValueError):
    pass


class InsufficientData(MixedKinds):
    pass


# reporting
class MissingJob(DriftlabError, KeyError):
    pass
