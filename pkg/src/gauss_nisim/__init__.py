"""Hermite-spectral tools for non-interactive simulation over correlated Gaussian sources."""

__version__ = "0.1.0"
