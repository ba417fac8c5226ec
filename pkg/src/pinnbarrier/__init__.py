"""Desk-scale laboratory for data-to-PDE consistency in physics-informed networks."""

__version__ = "0.1.0"
