"""Exception hierarchy for quadnest.

Every failure mode that callers are expected to handle gets its own class;
anything carrying diagnostic payload (entry times, partial results) stores it
on the instance rather than in the message only.
"""


class QuadnestError(Exception):
    """Base class for all quadnest errors."""


class ParamOutOfRange(QuadnestError):
    """Parameter a outside [-1/4, 2]."""


class VerificationFailed(QuadnestError):
    """A certified check (interval-arithmetic containment) did not pass."""


class NotDiffeomorphic(QuadnestError):
    """A critical preimage was detected inside an interval assumed monotone."""


class InconclusiveCycle(QuadnestError):
    """Cycle convergence detected but the multiplier enclosure straddles 1."""


class NoOrientationReversingPoint(QuadnestError):
    """No orientation-reversing repelling fixed point (a <= 3/4)."""


class ParabolicObstruction(QuadnestError):
    """Fixed-point multiplier within certification tolerance of -1."""


class NotNice(QuadnestError):
    """Niceness certificate failed: a boundary iterate provably enters the interior."""

    def __init__(self, msg, entry_time=None):
        super().__init__(msg)
        self.entry_time = entry_time


class BudgetExceeded(QuadnestError):
    """A time/count budget ran out.  ``partial`` may carry partial results."""

    def __init__(self, msg, partial=None, uncovered=None):
        super().__init__(msg)
        self.partial = partial
        self.uncovered = uncovered


class InvalidAddress(QuadnestError):
    """A tree address referenced an unknown or central branch index."""


class MissingLevelData(QuadnestError):
    """A statistic needs data from a level that was not built (e.g. c_{n-1} at n=1)."""


class InsufficientDepth(QuadnestError):
    """The nest is too shallow for the requested computation."""


class CombinatoricsUnstable(QuadnestError):
    """The base parameter's own combinatorics could not be verified."""


class HypothesisViolated(QuadnestError):
    """An estimate was requested outside the regime where it is claimed."""


class GammaOutOfRange(QuadnestError):
    """Quasisymmetry constant gamma < 1."""


class OrbitEntersNest(QuadnestError):
    """An orbit assumed to avoid the central domain entered it."""

    def __init__(self, msg, entry_time):
        super().__init__(msg)
        self.entry_time = entry_time


class CriticalOrbitHitsZero(QuadnestError):
    """The critical orbit hit 0 exactly (superattracting parameter)."""

    def __init__(self, msg, hit_time):
        super().__init__(msg)
        self.hit_time = hit_time


class PrecisionFailure(QuadnestError):
    """Enclosures degenerated and the retry at doubled precision also failed."""


class CoverViolation(QuadnestError):
    """A set is not contained in the union of the provided cover."""
