"""Numerical laboratory for distribution-valued fields smoothed by test functions."""

__version__ = "0.1.0"
