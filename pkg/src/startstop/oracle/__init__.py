"""Independent checks on the direct solver.

Two oracles, sharing nothing with the solver's tangency construction:

* :mod:`startstop.oracle.grid` replaces the diffusion with a Markov chain
  on a finite grid and iterates the coupled stopping problems to their
  fixed point.
* :mod:`startstop.oracle.mc` simulates threshold policies path by path
  against the raw discounted-reward objective.
"""

from .grid import (
    GridScheme,
    IterationReport,
    SchemeUnstable,
    build_grid,
    value_iteration,
)
from .mc import SimulationEstimate, simulate_policy

__all__ = [
    "GridScheme",
    "IterationReport",
    "SchemeUnstable",
    "build_grid",
    "value_iteration",
    "SimulationEstimate",
    "simulate_policy",
]
