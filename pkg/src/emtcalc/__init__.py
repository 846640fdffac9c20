"""Symbolic derivation and comparison of energy-momentum tensors."""

__version__ = "0.1.0"
