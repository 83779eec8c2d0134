"""Coupled deformation-diffusion finite elements with a non-negative diffusion solver."""

__version__ = "0.1.0"
