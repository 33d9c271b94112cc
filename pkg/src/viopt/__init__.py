"""Optimal control of l1-regularized variational inequalities.

Forward solves (Huber continuation + semismooth Newton), directional
derivatives of the solution map, adjoint-based reduced gradients, a
dogleg trust-region outer loop and stationarity certificates.
"""

from .adjoint import (
    ControlProblem,
    adjoint_state,
    directional_cost_derivative,
    reduced_cost,
    reduced_cost_and_solution,
    reduced_gradient,
)
from .core import (
    IndexSets,
    ViProblem,
    ViSolution,
    classify_sets,
    complementarity_residual,
    compute_slack,
    load_problem,
    residual_norm,
    save_problem,
)
from .problems import (
    GridSpec,
    SweepResult,
    build_laplacian,
    desired_state,
    paper_example,
    sweep,
    tracking_control,
    zero_fraction,
)
from .sensitivity import (
    ConeViSolver,
    DerivativePair,
    DerivativeSystemReport,
    derivative_cone_vi,
    derivative_gateaux,
    finite_difference_quotient,
    verify_derivative_system,
)
from .ssn import HuberParams, SsnLog, huber_map, solve_vi, ssn_newton_system
from .stationarity import (
    StationarityReport,
    check_b_stationarity,
    check_c_stationarity,
    check_strong_stationarity,
    stationarity_multipliers,
)
from .trust_region import (
    BfgsModel,
    OptimizeResult,
    QuadraticModel,
    TrustRegionConfig,
    bfgs_update,
    cauchy_step,
    fcd_accepts,
    newton_step,
    optimize,
    radius_update,
)

__all__ = [
    "ControlProblem",
    "adjoint_state",
    "directional_cost_derivative",
    "reduced_cost",
    "reduced_cost_and_solution",
    "reduced_gradient",
    "IndexSets",
    "ViProblem",
    "ViSolution",
    "classify_sets",
    "complementarity_residual",
    "compute_slack",
    "load_problem",
    "residual_norm",
    "save_problem",
    "GridSpec",
    "SweepResult",
    "build_laplacian",
    "desired_state",
    "paper_example",
    "sweep",
    "tracking_control",
    "zero_fraction",
    "ConeViSolver",
    "DerivativePair",
    "DerivativeSystemReport",
    "derivative_cone_vi",
    "derivative_gateaux",
    "finite_difference_quotient",
    "verify_derivative_system",
    "HuberParams",
    "SsnLog",
    "huber_map",
    "solve_vi",
    "ssn_newton_system",
    "StationarityReport",
    "check_b_stationarity",
    "check_c_stationarity",
    "check_strong_stationarity",
    "stationarity_multipliers",
    "BfgsModel",
    "OptimizeResult",
    "QuadraticModel",
    "TrustRegionConfig",
    "bfgs_update",
    "cauchy_step",
    "fcd_accepts",
    "newton_step",
    "optimize",
    "radius_update",
]
