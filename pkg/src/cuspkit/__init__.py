"""Cusp geometry of hyperbolic knot and link complements."""

from cuspkit.hmodel import (
    INFINITY,
    DEFAULT_TOL,
    Tolerance,
    MoebiusMap,
    Horoball,
    GeodesicPlane,
)

__all__ = [
    "INFINITY",
    "DEFAULT_TOL",
    "Tolerance",
    "MoebiusMap",
    "Horoball",
    "GeodesicPlane",
]

__version__ = "0.1.0"
