"""Partial optimal transport solvers with exact feasibility guarantees.

The package provides the problem model and constraint machinery (`core`),
a projection onto the exact feasible set (`rounding`), matrix-scaling
solvers on the dummy-bin reduction (`sinkhorn`), an accelerated
primal-dual method on the entropic dual (`apdagd`), a dual-extrapolation
saddle-point method (`dualextra`), a dense-simplex LP oracle
(`reference`), and an experiment harness (`generators`, `files`, `cli`).
"""

from . import errors
from .apdagd import (
    ApdagdState,
    DualPoint,
    EntropicConfig,
    apdagd_loop,
    approx_pot_apdagd,
    dual_value_grad,
    primal_from_dual,
)
from .core import (
    ConstraintImage,
    IterationRecord,
    PotProblem,
    PrimalPoint,
    SolveReport,
    apply_A,
    constraint_violation,
    feasibility_tol,
    pot_objective,
    validate_problem,
)
from .dualextra import (
    NormalizedProblem,
    SaddleState,
    am_prox,
    de_solve,
    duality_gap,
    normalize,
    regularizer_value,
    saddle_gradient,
)
from .generators import GeneratorSpec, gen_gaussian_mixture, gen_random_histogram, generate
from .reference import ExactSolution, solve_exact
from .rounding import RoundingOutcome, enforce_slack, round_pot
from .sinkhorn import (
    ExtendedOtProblem,
    ScalingState,
    extend,
    round_ot,
    sinkhorn_ot,
    solve_feasible,
    solve_infeasible,
)

__version__ = "0.1.0"

__all__ = [
    "errors",
    "__version__",
    # core
    "PotProblem", "PrimalPoint", "ConstraintImage", "SolveReport",
    "IterationRecord", "validate_problem", "apply_A", "constraint_violation",
    "pot_objective", "feasibility_tol",
    # rounding
    "RoundingOutcome", "enforce_slack", "round_pot",
    # sinkhorn
    "ExtendedOtProblem", "ScalingState", "extend", "sinkhorn_ot", "round_ot",
    "solve_infeasible", "solve_feasible",
    # apdagd
    "DualPoint", "EntropicConfig", "ApdagdState", "primal_from_dual",
    "dual_value_grad", "apdagd_loop", "approx_pot_apdagd",
    # dual extrapolation
    "NormalizedProblem", "SaddleState", "normalize", "saddle_gradient",
    "am_prox", "regularizer_value", "duality_gap", "de_solve",
    # reference oracle
    "ExactSolution", "solve_exact",
    # harness
    "GeneratorSpec", "generate", "gen_gaussian_mixture", "gen_random_histogram",
]
