"""Numerical laboratory for power moments of the Rankin-Selberg error term."""

__version__ = "0.1.0"
