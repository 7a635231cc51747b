"""Exception types shared across the package."""


class SlokError(Exception):
    """Base class for all package-specific errors."""


class NonConvex(SlokError):
    """A support function fails strict convexity (some h + h'' <= 0)."""


class Infeasible(SlokError):
    """No transport plan of finite cost exists for the given marginals."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class EmptyInterior(SlokError):
    """A halfspace intersection has empty interior."""


class DegenerateBody(SlokError):
    """Dual potentials do not define an admissible convex body."""


class NonPositiveDensity(SlokError):
    """A density that must be strictly positive has a non-positive entry."""


class FanMismatch(SlokError):
    """Two polytopes expected to share a normal fan do not."""
