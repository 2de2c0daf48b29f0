"""Exception hierarchy shared by every module."""


class InfoQueueError(Exception):
    """Base class for all package errors."""

    code = "error"


class ValidationError(InfoQueueError, ValueError):
    code = "validation"


class UnstableRegime(InfoQueueError, ArithmeticError):
    """An effective arrival rate reached or exceeded the service rate."""

    code = "unstable_regime"


class NoJoin(InfoQueueError):
    """Nobody joins: the net value of service is zero at every joining level."""

    code = "no_join"


class NotMM1(InfoQueueError):
    """Operation is only defined for exponential service."""

    code = "not_mm1"


class OutOfSupport(InfoQueueError, ValueError):
    code = "out_of_support"


class NoCrossing(InfoQueueError):
    """A sign-change search found no crossing on its bracket.

    ``identical`` is set when the two compared functions coincide on the
    whole bracket (for example a point-mass belief).
    """

    code = "no_crossing"

    def __init__(self, message, identical=False):
        super().__init__(message)
        self.identical = identical


class NonUnimodal(InfoQueueError):
    """Two separated local maxima with materially different values."""

    code = "non_unimodal"

    def __init__(self, message, candidates=()):
        super().__init__(message)
        self.candidates = list(candidates)


class UnstableEffective(InfoQueueError):
    """Simulated server utilisation stayed at (or above) saturation."""

    code = "unstable_effective"
