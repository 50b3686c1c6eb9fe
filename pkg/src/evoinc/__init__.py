"""Solvers for evolution inclusions driven by time-dependent maximal monotone operators."""

__version__ = "0.1.0"
