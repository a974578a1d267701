"""Cut-cell B-spline Galerkin solver for a plate with a clamped inclusion."""

from .couple import CoupleField, h_minus_half_norm
from .grid import PlateGrid, build_grid
from .norms import (
    EnergyEstimateReport,
    FunctionField,
    disc_integral,
    displacement_l2,
    energy,
    h2_norm,
    h_minus_half_surrogate,
    hessian_l2,
    integrate,
    verify_energy_estimate,
    work_identity,
)
from .solve import (
    DiscreteSolution,
    boundary_affine_fit,
    equilibrium_residuals,
    project_function,
    release_factorizations,
    solve_dirichlet_form,
    solve_rigid_form,
)

__all__ = [
    "CoupleField",
    "DiscreteSolution",
    "EnergyEstimateReport",
    "FunctionField",
    "PlateGrid",
    "boundary_affine_fit",
    "build_grid",
    "disc_integral",
    "displacement_l2",
    "energy",
    "equilibrium_residuals",
    "h2_norm",
    "h_minus_half_norm",
    "h_minus_half_surrogate",
    "hessian_l2",
    "integrate",
    "project_function",
    "release_factorizations",
    "solve_dirichlet_form",
    "solve_rigid_form",
    "verify_energy_estimate",
    "work_identity",
]
