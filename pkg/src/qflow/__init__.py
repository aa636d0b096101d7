"""Spectral simulation of conformal Q-curvature flows on the circle."""

__version__ = "0.1.0"
