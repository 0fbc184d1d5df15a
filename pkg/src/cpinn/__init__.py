"""Consistent physics-informed collocation for the heat equation."""

__version__ = "0.1.0"
