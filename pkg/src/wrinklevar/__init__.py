"""Membrane-plus-bending wrinkling model: discrete energy minimization and
numerical checks of the density's convexity and growth properties."""
from .constitutive import MaterialParams
from .discretization import BoundarySpec, DeformationState, GridSpec, LoadSpec
from .minimizer import MinimizerConfig, continuation_sweep, minimize

__all__ = [
    "BoundarySpec", "DeformationState", "GridSpec", "LoadSpec", "MaterialParams",
    "MinimizerConfig", "continuation_sweep", "minimize",
]
__version__ = "0.1.0"
