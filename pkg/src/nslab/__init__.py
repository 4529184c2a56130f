"""Numerical laboratory for regular sets of perturbed Navier-Stokes flows."""
from .grid import GridSpec, PhysicalField, SpectralField
from .kernels import BACKEND

__all__ = ["GridSpec", "PhysicalField", "SpectralField", "BACKEND"]
__version__ = "0.1.0"
