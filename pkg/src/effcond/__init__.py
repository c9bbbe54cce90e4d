"""Effective conductivity of two-dimensional periodic two-phase composites."""

__version__ = "0.1.0"
