"""Finite-window equidecomposition lab.

Torus shapes are sampled onto lattice windows through a system of free
translation vectors; bipartite translation matchings are built, audited and
rendered as piece maps.
"""

from eqdec.errors import ArgumentError, EstimateError, LoadError, PrecisionError, ResourceError

__all__ = [
    "ArgumentError",
    "EstimateError",
    "LoadError",
    "PrecisionError",
    "ResourceError",
]

__version__ = "0.1.0"
