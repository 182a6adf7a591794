"""Exception types shared across the package.

Every failure mode that callers are expected to catch has its own class;
generic ValueError/TypeError are reserved for plain programming errors
(bad argument types, malformed family strings and the like).
"""


class DimcertError(Exception):
    """Base class for all package-specific errors."""


class DivisorContainsZero(DimcertError):
    """Ball division where the divisor interval straddles or touches zero."""


class DomainViolation(DimcertError):
    """Elementary function applied to a ball outside its real domain."""


class RootIsolationFailure(DimcertError):
    """Certified root isolation could not produce a verified enclosure."""


class OverlapError(DimcertError):
    """Affine branch images overlap on an interior interval."""


class NoConvergence(DimcertError):
    """Power iteration hit its iteration cap before the tolerance."""

    def __init__(self, message, iterations=None, last_estimate=None):
        super().__init__(message)
        self.iterations = iterations
        self.last_estimate = last_estimate


class NonPositiveCandidate(DimcertError):
    """Candidate eigenvector has an entry that is not strictly positive."""


class OutOfDomain(DimcertError):
    """Evaluation point lies outside the grid interval."""


class DepthExhausted(DimcertError):
    """Adaptive bisection reached its depth cap without a decision.

    This is inconclusive, never a refutation: carries the partial log.
    """

    def __init__(self, message, log=None):
        super().__init__(message)
        self.log = log


class CoverageGap(DimcertError):
    """Replayed verification leaves do not tile the domain exactly."""


class InequalityFailure(DimcertError):
    """Replayed leaf enclosure no longer satisfies the claimed inequality."""


class BracketViolation(DimcertError):
    """Certified dimension bracket escapes its a-priori sanity bracket."""


class Inconclusive(DimcertError):
    """Dimension bisection gave up after the full escalation ladder.

    Carries the midpoint that failed, the best certified bounds so far and
    a partial certificate dictionary.
    """

    def __init__(self, message, midpoint=None, bounds=None, partial=None):
        super().__init__(message)
        self.midpoint = midpoint
        self.bounds = bounds
        self.partial = partial


class LevelTooLarge(DimcertError):
    """Requested graph level / orbit depth above the supported cap."""


class EmptyInterior(DimcertError):
    """Dirichlet spectrum requested for a graph without interior vertices."""


class UnknownFamily(DimcertError):
    """Family registry string does not parse to a known system."""
