"""Exception taxonomy shared across the package.

Domain errors (bad parameters for a well-formed request) are distinguished
from resource errors (limits hit mid-computation) so the service layer and
CLI can map them to stable status/exit codes.
"""


class PercolabError(Exception):
    """Base class for all package errors."""


class DomainError(PercolabError):
    """A parameter is outside the operation's domain."""


class InvalidEdgeError(DomainError):
    """Site pair is not a nearest-neighbour lattice edge."""


class InvalidRegionError(DomainError):
    """Malformed box or annulus (negative radius, inner >= outer, ...)."""


class CoordinateRangeError(DomainError):
    """Coordinate outside the supported |x|,|y| < 2**30 range."""


class SubcriticalError(DomainError):
    """p <= p_c requested where the correlation length diverges."""


class UnsupportedSigmaError(DomainError):
    """Colour sequence outside the supported shapes."""


class NotCertifiableError(DomainError):
    """Outlet certification asked of a run without a radius stop rule."""


class BracketError(PercolabError):
    """Bisection bracket failed (predicate not monotone under noise)."""


class ResourceLimitError(PercolabError):
    """A computation hit its step/memory budget.

    Carries the partial result when one exists (e.g. a truncated
    invasion run) so callers can inspect how far it got.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class RejectionLimitError(ResourceLimitError):
    """Rejection sampler exhausted its attempt budget.

    ``acceptance_rate`` is the observed rate (accepted / attempts), an
    upper-bound estimate when nothing was accepted.
    """

    def __init__(self, message, attempts, accepted):
        super().__init__(message, partial=None)
        self.attempts = attempts
        self.accepted = accepted
        self.acceptance_rate = accepted / attempts if attempts else 0.0


class UndefinedLawError(DomainError):
    """Operation on an empty window law."""
