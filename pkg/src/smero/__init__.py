"""Spectrally meromorphic one-dimensional Schrodinger operators."""

__version__ = "0.1.0"
