"""Boundary evolution by Dirichlet-to-Neumann operators: 2D P1 finite
elements, operator calculus, time stepping, moving-domain transforms, and
numerical verification of the operator hypotheses."""

from .coeffs import (TIME_INF, CoefficientFamily, preset_constant_drift,
                     preset_laplace_shift, preset_oscillating)
from .dtn import DtnOperator
from .mesh import TriMesh, generate_disk_mesh, generate_square_mesh, load_mesh, save_mesh

__all__ = [
    "TIME_INF", "CoefficientFamily", "DtnOperator", "TriMesh",
    "generate_disk_mesh", "generate_square_mesh", "load_mesh", "save_mesh",
    "preset_constant_drift", "preset_laplace_shift", "preset_oscillating",
]

__version__ = "0.1.0"
