"""Numerical laboratory for gravity water waves: spectral fields, paradifferential
calculus, the Dirichlet-Neumann operator, surface dynamics and dispersive diagnostics."""
from ._kernels import backend
from .spectral import PeriodicGrid, SpectralField

__version__ = "0.1.0"
__all__ = ["PeriodicGrid", "SpectralField", "backend", "__version__"]
