"""Reconstruction of piecewise-constant Robin transmission coefficients
from finitely many boundary measurements, via a certified convex
semidefinite program."""

from .criterion import (
    BoxBounds,
    CriterionData,
    MeasurementSweep,
    closed_form_step_count,
    converse_monotonicity_check,
    evaluate_criterion,
    find_sufficient_m,
    probe_points,
    probe_step_count,
)
from .estimator import CriterionNotMetError, RobinReconstructor
from .fem import (
    DiscreteForwardMap,
    Geometry,
    Mesh,
    MeshError,
    assemble,
    boundary_current,
    build_disk_geometry,
    mesh_to_text,
    triangulate,
)
from .solver import (
    ConvergenceError,
    InfeasibleProblemError,
    ReconstructionResult,
    SdpProblem,
    SolverOptions,
    StageRecord,
    brute_force_minimize,
    solve,
    solve_noisy,
)
from .symmat import SymMatrix, as_sym_matrix, lambda_max, loewner_leq, spectral_norm

__version__ = "0.1.0"

__all__ = [
    "BoxBounds",
    "ConvergenceError",
    "CriterionData",
    "CriterionNotMetError",
    "DiscreteForwardMap",
    "Geometry",
    "InfeasibleProblemError",
    "MeasurementSweep",
    "Mesh",
    "MeshError",
    "ReconstructionResult",
    "RobinReconstructor",
    "SdpProblem",
    "SolverOptions",
    "StageRecord",
    "SymMatrix",
    "as_sym_matrix",
    "assemble",
    "boundary_current",
    "brute_force_minimize",
    "build_disk_geometry",
    "closed_form_step_count",
    "converse_monotonicity_check",
    "evaluate_criterion",
    "find_sufficient_m",
    "lambda_max",
    "loewner_leq",
    "mesh_to_text",
    "probe_points",
    "probe_step_count",
    "solve",
    "solve_noisy",
    "spectral_norm",
    "triangulate",
]
