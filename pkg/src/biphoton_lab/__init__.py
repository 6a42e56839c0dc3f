"""Numerical laboratory for single-photon Fourier spectroscopy of an SPDC pair."""

__version__ = "0.1.0"
