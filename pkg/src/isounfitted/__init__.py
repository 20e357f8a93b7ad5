"""Isoparametric unfitted finite elements in 2D.

High-order geometry from a level set via a mesh deformation, an unfitted
Nitsche discretization on the deformed cut mesh, and convergence tooling.
"""
from .benchmark import InterfaceProblem, planar_patch, smoothed_square
from .config import RunConfig, format_config, load_config, parse_config
from .deform import (
    Deformation,
    build_theta,
    build_theta_gamma,
    deformation_gradient,
    lenoir_extend_edge,
    project_nodal,
    search_direction,
    solve_dh,
)
from .exceptions import (
    BoundaryConflict,
    DegenerateLevelSet,
    FactorizationFailure,
    IsoUnfittedError,
    NoRoot,
    ResidualFailure,
    ResolutionError,
    SingularJacobian,
)
from .experiment import export_geometry, run_convergence, solve_level
from .fe import (
    LagrangeSpace,
    UnfittedSpace,
    build_unfitted_space,
    evaluate_isoparametric,
    reference_basis,
)
from .levelset import CutTopology, classify_cut, gamma_lin_measure, interpolate_levelset
from .mesh import Mesh, build_structured_mesh, refine_uniform
from .metrics import ErrorReport, LevelErrors, compute_errors, eoc_table
from .nitsche import (
    AssembledSystem,
    ProblemData,
    QuadConfig,
    assemble,
    averaging_weights,
    inverse_constant,
    inverse_estimate_probe,
)
from .quadrature import mapped_interface_points, mapped_volume_points, segment_rule, triangle_rule
from .selftest import self_test
from .solver import SolveReport, solve_direct, solve_system

__all__ = [
    "AssembledSystem",
    "BoundaryConflict",
    "CutTopology",
    "DegenerateLevelSet",
    "Deformation",
    "ErrorReport",
    "FactorizationFailure",
    "InterfaceProblem",
    "IsoUnfittedError",
    "LagrangeSpace",
    "LevelErrors",
    "Mesh",
    "NoRoot",
    "ProblemData",
    "QuadConfig",
    "ResidualFailure",
    "ResolutionError",
    "RunConfig",
    "SingularJacobian",
    "SolveReport",
    "UnfittedSpace",
    "assemble",
    "averaging_weights",
    "build_structured_mesh",
    "build_theta",
    "build_theta_gamma",
    "build_unfitted_space",
    "classify_cut",
    "compute_errors",
    "deformation_gradient",
    "eoc_table",
    "evaluate_isoparametric",
    "export_geometry",
    "format_config",
    "gamma_lin_measure",
    "interpolate_levelset",
    "inverse_constant",
    "inverse_estimate_probe",
    "lenoir_extend_edge",
    "load_config",
    "mapped_interface_points",
    "mapped_volume_points",
    "parse_config",
    "planar_patch",
    "project_nodal",
    "reference_basis",
    "refine_uniform",
    "run_convergence",
    "search_direction",
    "segment_rule",
    "self_test",
    "smoothed_square",
    "solve_dh",
    "solve_direct",
    "solve_level",
    "triangle_rule",
]
