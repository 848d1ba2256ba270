"""Periodic spectral solver for the relaxed nonlocal Stokes system."""
__version__ = "0.1.0"

from .errors import NLStokesError
from .kernels import KernelSet, RadialKernelProfile, Role, build_kernel_set, normalize, preset
from .quadrature import BACKEND, available_backends
from .fields import SpectralField, grid_to_coeffs, random_field, sample_on_grid, sobolev_norm
from .symbols import SymbolTable, certify_bounds, symbol_table
from .solver import StokesProblem, StokesSolution, Variant, solve, solve_local, solve_mollified, solve_nonlocal
from .lab import ConvergenceReport, ac_diagram, band_sweep, delta_sweep, fit_rate, make_case

__all__ = [
    "NLStokesError", "KernelSet", "RadialKernelProfile", "Role", "build_kernel_set", "normalize", "preset",
    "BACKEND", "available_backends", "SpectralField", "grid_to_coeffs", "random_field", "sample_on_grid",
    "sobolev_norm", "SymbolTable", "certify_bounds", "symbol_table", "StokesProblem", "StokesSolution",
    "Variant", "solve", "solve_local", "solve_mollified", "solve_nonlocal", "ConvergenceReport",
    "ac_diagram", "band_sweep", "delta_sweep", "fit_rate", "make_case",
]
