"""Wavelet-based acoustic-emission event detection and analysis."""

__version__ = "0.1.0"
