"""Finite-element laboratory for the Stokes, pressure-Poisson and eps-Stokes problems."""

__version__ = "0.1.0"
