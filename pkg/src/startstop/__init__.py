"""Optimal two-regime switching for one-dimensional diffusions.

The solver finds the pair of thresholds (a*, b*) and line coefficients
(beta0*, beta1*) by the direct construction: in each regime the excess
value over sitting still, read in that regime's natural coordinate, is
the smallest line above a coupled obstacle, and the two tangency
problems are iterated to their joint fixed point.  `startstop.oracle`
carries two independent checks (a Markov-chain grid and Monte Carlo
policy simulation) and `startstop.cli` a small command-line front end.

The names below are the supported surface; everything else is internal
and may move.
"""

from .model import (
    AffineReward,
    ConstantCost,
    CustomCost,
    CustomDiffusion,
    CustomReward,
    Endpoint,
    GeometricBM,
    ModelError,
    OrnsteinUhlenbeck,
    RegimeSpec,
    SwitchingProblem,
    ThresholdPolicy,
    gbm_problem,
    ou_problem,
    validate_problem,
)
from .fundamentals import build_fundamentals
from .noswitch import no_switch_value
from .oracle import (
    IterationReport,
    SimulationEstimate,
    build_grid,
    simulate_policy,
    value_iteration,
)
from .solver import (
    InfiniteValue,
    NonConvergence,
    NoSwitchEverywhere,
    OrderingViolation,
    Solution,
    SolverError,
    evaluate_value,
    solve,
    solve_simultaneous,
)

__all__ = [
    "AffineReward",
    "ConstantCost",
    "CustomCost",
    "CustomDiffusion",
    "CustomReward",
    "Endpoint",
    "GeometricBM",
    "InfiniteValue",
    "IterationReport",
    "ModelError",
    "NoSwitchEverywhere",
    "NonConvergence",
    "OrderingViolation",
    "OrnsteinUhlenbeck",
    "RegimeSpec",
    "SimulationEstimate",
    "Solution",
    "SolverError",
    "SwitchingProblem",
    "ThresholdPolicy",
    "build_fundamentals",
    "build_grid",
    "evaluate_value",
    "gbm_problem",
    "no_switch_value",
    "ou_problem",
    "simulate_policy",
    "solve",
    "solve_simultaneous",
    "validate_problem",
    "value_iteration",
]
