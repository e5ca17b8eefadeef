"""Exception and warning types shared across the package."""


class RatSemigroupError(Exception):
    """Base class for numerical failures raised by this package."""


class DegreeZero(RatSemigroupError, ValueError):
    pass


class NonConvergence(RatSemigroupError):
    """Root iteration did not settle; ``best`` holds the last iterate."""

    def __init__(self, msg, best=None):
        super().__init__(msg)
        self.best = best


class PoleDerivative(RatSemigroupError, ValueError):
    pass


class EmptyWord(RatSemigroupError, ValueError):
    pass


class BudgetExceeded(RatSemigroupError):
    pass


class NoRepellingFixedPoint(RatSemigroupError):
    pass


class EmptyCloud(RatSemigroupError, ValueError):
    pass


class NoBracket(RatSemigroupError):
    """Finite-n pressure estimates do not change sign on the search interval."""

    def __init__(self, msg, p_lo=None, p_hi=None):
        super().__init__(msg)
        self.p_lo = p_lo
        self.p_hi = p_hi


class Inconclusive(RatSemigroupError):
    pass


class AllCandidatesRejected(RatSemigroupError):
    pass


class SeriesNotDecaying(RatSemigroupError):
    pass


class ForbiddenPair(RatSemigroupError, ValueError):
    pass


class NonpositiveRadius(RatSemigroupError, ValueError):
    pass


class UnknownName(RatSemigroupError, KeyError):
    pass


class DegenerateFit(UserWarning):
    """Box counts do not vary over the requested scale range."""


class InfiniteSum(UserWarning):
    """A preimage with vanishing derivative was dropped from a t > 0 sum."""
