"""Numerical laboratory for volume-filling cross-diffusion systems."""
__version__ = "0.1.0"
