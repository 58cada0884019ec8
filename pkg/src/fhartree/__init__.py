"""Numerical laboratory for the fractional Hartree equation and its mean-field derivation."""
from .spectral import Field, Grid, KernelSpec, SobolevIndex, set_threads
from .dynamics import HartreeParams, Trajectory, evolve, strang_step

__all__ = ["Field", "Grid", "KernelSpec", "SobolevIndex", "HartreeParams", "Trajectory",
           "evolve", "strang_step", "set_threads"]
