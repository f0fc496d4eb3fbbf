"""Spectral analysis of Hill's equation with complex periodic potentials."""

__version__ = "0.1.0"
