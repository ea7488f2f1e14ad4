"""Numerical detection of s-points of compactly supported potentials."""

__version__ = "0.1.0"
