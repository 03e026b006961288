"""Simulation and verification workbench for dynamically measured qubit codes
on heavy-hexagonal hardware graphs.

Subpackages build measurement circuits for several measurement schedules
(`protocols`), run them exactly or under circuit-level noise (`sim`), extract
detector error models (`dem`), decode with minimum-weight perfect matching
(`decode`), and estimate logical error rates, fault distances, and thresholds
(`analysis`).
"""

__version__ = "0.1.0"

__all__ = [
    "analysis",
    "circuit",
    "decode",
    "dem",
    "lattice",
    "protocols",
    "sim",
]
