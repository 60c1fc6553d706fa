"""Drift-plus-penalty ratio optimization for renewal systems."""

__version__ = "0.1.0"
