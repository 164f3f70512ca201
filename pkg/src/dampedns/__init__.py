"""Pseudo-spectral solver and a-priori estimate checks for damped anisotropic Navier-Stokes."""

__version__ = "0.1.0"
