"""Numerical laboratory for stationary measures, Furstenberg entropy and rotation gaps."""

__version__ = "0.1.0"
