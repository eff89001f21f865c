"""Interior-point solver for vector-valued p-Laplace problems.

Solves min (1/p) int |grad(u+g)|^p - int_Gamma h u - int f u over
piecewise-linear finite elements with mixed Dirichlet/Neumann boundary
conditions, for any exponent 2 <= p < infinity in one pass (no
continuation over p), plus an experimental direct mode for the p = inf
limit.
"""

from .barrier import (
    BarrierPoint,
    HessianFactorError,
    InfeasiblePointError,
    eval_F,
    eval_grad,
    eval_hess_apply,
    eval_hess_factor,
    newton_decrement,
)
from .femops import FemOperators, apply_gradient_norms, assemble, xp_norm_p
from .inflimit import InfProblem, inf_problem, solve_inf
from .mesh import (
    DIRICHLET,
    NEUMANN,
    Mesh,
    QualityReport,
    export_vtk,
    quality,
    signed_areas,
    unit_interval,
    unit_square,
)
from .problem import (
    ContinuousData,
    DiscreteProblem,
    discretize,
    heuristic_R,
    initial_point,
    objective,
)
from .solver import (
    SolveReport,
    SolverConfig,
    SolverError,
    damped_newton_step,
    solve,
    stage_aux,
    stage_main,
)

__version__ = "0.1.0"

__all__ = [
    "BarrierPoint",
    "ContinuousData",
    "DIRICHLET",
    "DiscreteProblem",
    "FemOperators",
    "HessianFactorError",
    "InfProblem",
    "InfeasiblePointError",
    "Mesh",
    "NEUMANN",
    "QualityReport",
    "SolveReport",
    "SolverConfig",
    "SolverError",
    "apply_gradient_norms",
    "assemble",
    "damped_newton_step",
    "discretize",
    "eval_F",
    "eval_grad",
    "eval_hess_apply",
    "eval_hess_factor",
    "export_vtk",
    "heuristic_R",
    "inf_problem",
    "initial_point",
    "newton_decrement",
    "objective",
    "quality",
    "signed_areas",
    "solve",
    "solve_inf",
    "stage_aux",
    "stage_main",
    "unit_interval",
    "unit_square",
    "xp_norm_p",
    "__version__",
]
