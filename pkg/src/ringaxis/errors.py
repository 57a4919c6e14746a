"""Exception hierarchy shared by all ringaxis modules."""


class RingAxisError(Exception):
    """Base class for all ringaxis errors."""


class ConfigurationError(RingAxisError):
    """A seed or setting violates its preconditions (bad n, masses, tolerances...)."""


class CollisionDomainError(RingAxisError):
    """The ring radius reached (or is suspected of reaching) zero.

    Raised both for states with r <= 0 and for integrations whose step size
    underflows while r plunges.  For seeds with negative energy and nonzero
    angular momentum this must never happen; seeing it there means a bug.
    """


class OutsideFamilyError(RingAxisError):
    """An operation requiring c2 < 0 and c1 != 0 was given a seed outside that family."""


class TheoremViolationError(RingAxisError):
    """A certified analytic bound failed numerically.

    This signals an integrator or formula transcription bug, not physics.
    """


class DivergenceError(RingAxisError):
    """Reduced and direct n-body integrations disagree beyond the caller's tolerance."""


class BudgetExceededError(RingAxisError):
    """An integration or refinement exceeded its step / wall-clock budget."""


class SegmentError(RingAxisError):
    """A radius interval handed to quadrature reconstruction is not a valid monotone segment."""
