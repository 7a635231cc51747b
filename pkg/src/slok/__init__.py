"""Numerical laboratory for optimal transport on the sphere with the
logarithmic cost and the symmetric log-Minkowski problem."""

__version__ = "0.1.0"

from .errors import (
    DegenerateBody,
    EmptyInterior,
    FanMismatch,
    Infeasible,
    NonConvex,
    NonPositiveDensity,
    SlokError,
)

__all__ = [
    "DegenerateBody",
    "EmptyInterior",
    "FanMismatch",
    "Infeasible",
    "NonConvex",
    "NonPositiveDensity",
    "SlokError",
    "__version__",
]
