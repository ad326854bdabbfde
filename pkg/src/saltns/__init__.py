"""Spectral-Galerkin toolkit for 2D stochastic Navier-Stokes with transport noise."""
__version__ = "0.1.0"
