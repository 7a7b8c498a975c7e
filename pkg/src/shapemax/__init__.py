"""Nonsmooth shape optimization of max-type costs under elliptic PDEs."""

from .geometry import (Mesh, MeshQualityReport, deform_mesh, make_disk_mesh,
                       make_square_mesh)
from .fem import ScalarField, SparseSymSystem, VecField, solve_spd
from .pde import DiffusionLaw, StateSolution, solve_adjoint_l2, \
    solve_adjoint_point, solve_state
from .derivatives import (CostSpec, DerivativeFunctional, Metric,
                          assemble_dJ2, assemble_dj, cost_l2, cost_linfty,
                          gradient, inner, tracking_cost)
from .bundle import (ActiveSet, GradientBundle, QPResult, build_bundle,
                     min_norm_point, select_active, steepest_direction)
from .descent import RunConfig, RunHistory, run_l2, run_linfty

__all__ = [
    "Mesh", "MeshQualityReport", "deform_mesh", "make_disk_mesh",
    "make_square_mesh", "ScalarField", "SparseSymSystem", "VecField",
    "solve_spd", "DiffusionLaw", "StateSolution", "solve_adjoint_l2",
    "solve_adjoint_point", "solve_state", "CostSpec", "DerivativeFunctional",
    "Metric", "assemble_dJ2", "assemble_dj", "cost_l2", "cost_linfty",
    "gradient", "inner", "tracking_cost", "ActiveSet", "GradientBundle",
    "QPResult", "build_bundle", "min_norm_point", "select_active",
    "steepest_direction", "RunConfig", "RunHistory", "run_l2", "run_linfty",
]

__version__ = "0.1.0"
