"""Quantum error-mitigation toolbox.

Pauli channel algebra, quasi-probability cancellation, symmetry
verification and extrapolation estimators, checked against an exact
density-matrix simulator and a Monte Carlo trajectory engine.
"""

from __future__ import annotations

__version__ = "0.1.0"
