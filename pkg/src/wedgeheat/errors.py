"""Error types shared across the package."""


class NonConvergentError(RuntimeError):
    """A series or iterative quadrature failed to meet its tolerance.

    Raised instead of returning a silently degraded value; callers may loosen
    the tolerance, raise the term cap, or move the regime boundary.
    """


class NonFiniteError(ValueError):
    """A quantity that must be finite evaluated to nan or +-inf."""
