"""Exact Wiener-Hopf solutions for lattice waves scattered by a pair of parallel defects."""

from .factorization import factorize
from .farfield import farfield_bulk, farfield_waveguide, polar_scan
from .kernel import KernelFunction, ProblemConfig
from .lattice import BulkIncidence, Frequency, LatticeError, SpectralContext
from .reference_grid import GridSpec, assemble_and_solve, compare_on_circle
from .solver import FieldGrid, solve
from .superposition import PairConfig, assemble_pair

__all__ = [
    "BulkIncidence",
    "FieldGrid",
    "Frequency",
    "GridSpec",
    "KernelFunction",
    "LatticeError",
    "PairConfig",
    "ProblemConfig",
    "SpectralContext",
    "assemble_and_solve",
    "assemble_pair",
    "compare_on_circle",
    "factorize",
    "farfield_bulk",
    "farfield_waveguide",
    "polar_scan",
    "solve",
]
