"""Deterministic bilateral teleoperation simulator for an omnidirectional aerial vehicle."""

__version__ = "0.1.0"
