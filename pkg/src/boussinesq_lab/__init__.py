"""Pseudo-spectral laboratory for the stratified Boussinesq system in the
strong-stratification limit."""
from .spectral import FourierGrid, SpectralField, SpectralField4, PhysicalField, PhysicalField4
from .linear import FrequencyCutoff, EigenSystem, eigensystem, propagate, project_0, project_pm
from .solvers import SolverConfig, Trajectory

__version__ = "0.1.0"

__all__ = [
    "FourierGrid",
    "SpectralField",
    "SpectralField4",
    "PhysicalField",
    "PhysicalField4",
    "FrequencyCutoff",
    "EigenSystem",
    "eigensystem",
    "propagate",
    "project_0",
    "project_pm",
    "SolverConfig",
    "Trajectory",
]
