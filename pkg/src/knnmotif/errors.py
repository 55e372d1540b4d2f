"""Exception types raised across the package."""


class KnnMotifError(Exception):
    """Base class for all package errors."""


class DimensionMismatchError(KnnMotifError, ValueError):
    pass


class InsufficientPointsError(KnnMotifError, ValueError):
    """Fewer than k+1 points were supplied for a k-nearest-neighbor query."""


class DuplicatePointError(KnnMotifError, ValueError):
    """Two points coincide, so nearest neighbors are not well defined."""


class ImpossibleIndegreeError(KnnMotifError, ValueError):
    """Requested indegree exceeds the kissing-number bound kappa'(d) * k."""


class UnknownBoundError(KnnMotifError, ValueError):
    """No usable kappa'(d) bound is known for the requested dimension."""


class IndegreeBoundViolation(KnnMotifError, RuntimeError):
    """An observed indegree exceeded kappa'(d) * k.

    This can only happen through a tie-handling bug or degenerate input.
    """


class DegenerateStatisticError(KnnMotifError, ValueError):
    """A statistic has zero sample variance where a spread is required."""


class SizeGuardError(KnnMotifError, ValueError):
    """A brute-force oracle was asked to work on an input that is too large."""


class FormatError(KnnMotifError, ValueError):
    """An input file does not follow the expected layout."""
