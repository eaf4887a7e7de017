"""Quantum-Dot Array Characterization Package

Deterministic simulator of dense overlapping-gate silicon quantum-dot arrays
with oxide-thickness-dependent disorder, together with the automated
characterization pipeline that measures, extracts and summarizes them.
"""

__version__ = "1.0.0"
