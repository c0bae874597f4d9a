"""Computational laboratory for the annealed charged-polymer model on Z^d."""

__version__ = "0.1.0"
