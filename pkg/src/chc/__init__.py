"""Spectral simulation and adjoint-based velocity control of the stochastic
convective Cahn-Hilliard equation on a rectangle."""

from .adjoint import (
    AdjointTrajectory,
    CostWeights,
    TangentTrajectory,
    Targets,
    adjoint_solve,
    assemble_gradient,
    duality_gap,
    tangent_solve,
)
from .field import (
    GridSpec,
    NormKind,
    ScalarField,
    VectorField,
    gradient,
    inv_neumann_laplacian,
    laplacian,
    norm,
    spatial_mean,
)
from .forward import Models, SolverParams, StateTrajectory, forward_solve, forward_step, free_energy
from .noise import NoiseKind, NoiseModel, NoiseRealization, apply_B, apply_DB, apply_DB_adjoint, sample_noise
from .optimize import (
    ControlProblem,
    OptimizationReport,
    OptimizerConfig,
    PathSpec,
    evaluate_cost,
    gradient_check,
    run_projected_gradient,
    vi_residual,
)
from .potential import PotentialKind, PotentialModel, potential_eval, regularized_eval, resolvent_solve
from .velocity import (
    AdmissibleSet,
    StreamControl,
    control_norm,
    mollify_control,
    project_admissible,
    pullback_gradient,
    stream_to_velocity,
)

__version__ = "0.1.0"
