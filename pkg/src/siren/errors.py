"""Exception types shared across the package."""


class SirenError(Exception):
    """Base class for all library errors."""


class NotPositiveDefinite(SirenError):
    """Covariance matrix has a non-positive eigenvalue (up to scaled machine eps)."""


class NotSymmetric(SirenError):
    """Matrix is not symmetric within the required relative tolerance."""


class UnsupportedProjection(SirenError):
    """The set variant does not admit an exact Euclidean projection."""


class InfeasibleCenter(SirenError):
    """The localization center is not a member of the set."""


class NoConvergence(SirenError):
    """An iterative projection ran out of iterations.

    Carries the last iterate and its residual so callers can inspect
    how far the scheme got.
    """

    def __init__(self, message, last_iterate=None, residual=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual


class RangeViolation(SirenError):
    """An observation value lies outside the declared range Y."""


class NonFinite(SirenError):
    """A numerical expectation overflowed or produced NaN."""


class NoRoot(SirenError):
    """The population score equation has no solution: incompatible loss/model pair.

    ``bracket_exhausted`` distinguishes "score has constant sign but seems to
    approach zero" (root possibly beyond any practical bracket) from a score
    that stays bounded away from zero.
    """

    def __init__(self, message, score_lo=None, score_hi=None, bracket_exhausted=False):
        super().__init__(message)
        self.score_lo = score_lo
        self.score_hi = score_hi
        self.bracket_exhausted = bracket_exhausted


class BudgetExceeded(SirenError):
    """Corruption budget tau exceeds the number of observations."""


class UnboundedSet(SirenError):
    """Global mean width requested for a set with unbounded support function."""


class DegenerateSampling(SirenError):
    """Too few valid sample points survived feasibility filtering."""


class InvalidWindow(SirenError):
    """Small-ball truncation window violates M >= 32 t."""


class ConfigInvalid(SirenError):
    """Experiment configuration failed validation; message names the field."""
