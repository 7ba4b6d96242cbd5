"""Grid-based dynamic programming oracle for switching problems.

The solver in :mod:`startstop.solver` produces thresholds from a tangency
construction.  This module checks those answers by brute force: replace
the diffusion with a birth-death chain on a finite grid and iterate the
pair of coupled optimal stopping problems until the values settle.
Nothing here shares code with the solver, which is the point.

Scheme.  At an interior node the generator gets the standard three-point
stencil: central drift where that keeps both off-diagonal rates
nonnegative, one-sided otherwise.  The chain then jumps to a neighbour
after a local holding time dt_i = 1/(rate_lo + rate_hi), and discounting
enters implicitly as 1/(1 + discount * dt_i) per jump.  Row sums of the
discounted weights sit strictly below one, which makes every Bellman
operator below a sup-norm contraction.

Iteration.  ``w`` approximates the open-regime value, ``y`` the closed
one.  Both start from the never-switch values on the chain and improve
jointly: each sweep solves one stopping problem per regime against the
other regime's previous iterate minus the switching cost.  The stopping
problems are solved exactly (policy iteration on the stop set, one
banded linear solve per trial set), so sweep n admits strategies with
one more switch than sweep n-1 and the iterates increase nodewise.  The
alternative (feeding this sweep's ``w`` straight into the ``y`` update)
converges in fewer sweeps but loses that clean interpretation; we keep
the joint form.

Truncation.  Outside the grid the continuation value is frozen at the
never-switch value, except at a genuinely absorbing endpoint where it is
the stuck payoff reward/discount.  Edge nodes still see the switching
option, so pinning only affects the "continue" branch there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from ..model import (
    AffineReward,
    GeometricBM,
    OrnsteinUhlenbeck,
    SwitchingProblem,
    validate_problem,
)
from ..noswitch import no_switch_value

__all__ = [
    "GridScheme",
    "IterationReport",
    "SchemeUnstable",
    "build_grid",
    "value_iteration",
]


class SchemeUnstable(ArithmeticError):
    """A transition weight went negative: grid too coarse for the drift."""


# --------------------------------------------------------------------------
# Grid construction
# --------------------------------------------------------------------------

_GBM_WINDOW_FACTOR = 64.0
_OU_WINDOW_SIGMAS = 6.0


@dataclass(frozen=True)
class GridScheme:
    """Discounted birth-death approximation of both regimes on one grid.

    ``w_lo[i, j]`` / ``w_hi[i, j]`` are the already-discounted weights on
    the left / right neighbour for regime i at node j; ``run[i, j]`` is
    the discounted expected reward earned over the holding time.  Edge
    nodes carry no transitions; ``backstop[i, side]`` holds the value
    their "continue" branch is pinned to.
    """

    nodes: np.ndarray
    spacing: str
    w_lo: np.ndarray
    w_hi: np.ndarray
    run: np.ndarray
    gamma: np.ndarray
    dt: np.ndarray
    backstop: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)


def _default_window(problem) -> tuple[float, float, str]:
    """A window wide enough that the pinned tails are negligible."""
    families = [problem.regime(i).family for i in (0, 1)]
    if all(isinstance(f, GeometricBM) for f in families):
        reward = problem.running_reward
        if isinstance(reward, AffineReward) and reward.slope != 0.0:
            x_ref = max(abs(reward.intercept / reward.slope), 1e-3)
        else:
            x_ref = 1.0
        return x_ref / _GBM_WINDOW_FACTOR, x_ref * _GBM_WINDOW_FACTOR, "log"
    ou = [f for f in families if isinstance(f, OrnsteinUhlenbeck)]
    if ou:
        spread = max(
            f.vol / math.sqrt(2.0 * f.reversion_speed) for f in ou
        )
        levels = [f.level for f in ou]
        lo = min(levels) - _OU_WINDOW_SIGMAS * spread
        hi = max(levels) + _OU_WINDOW_SIGMAS * spread
        return lo, hi, "uniform"
    raise ValueError(
        "no default grid window for custom dynamics; pass lo and hi explicitly"
    )


def build_grid(
    problem: SwitchingProblem,
    n_nodes: int = 2000,
    *,
    lo: float | None = None,
    hi: float | None = None,
    spacing: str | None = None,
    drift_scheme: str = "auto",
) -> GridScheme:
    """Discretize both regimes of ``problem`` on a shared grid.

    ``drift_scheme`` is "auto" (central, falling back to one-sided
    differences at nodes where central would produce a negative weight),
    "upwind" (always one-sided), or "central" (never fall back; the
    resulting scheme may be non-monotone and is validated only when
    used).
    """
    problem = validate_problem(problem)
    if n_nodes < 8:
        raise ValueError(f"need at least 8 nodes, got {n_nodes}")
    if drift_scheme not in ("auto", "upwind", "central"):
        raise ValueError(f"unknown drift_scheme {drift_scheme!r}")

    c, d = problem.interval
    win_lo, win_hi, win_sp = None, None, None
    if lo is None or hi is None or spacing is None:
        win_lo, win_hi, win_sp = _default_window(problem)
    lo = win_lo if lo is None else float(lo)
    hi = win_hi if hi is None else float(hi)
    spacing = win_sp if spacing is None else spacing
    if not math.isinf(c):
        lo = max(lo, c)
    if not math.isinf(d):
        hi = min(hi, d)
    if not lo < hi:
        raise ValueError(f"empty grid window [{lo}, {hi}]")

    if spacing == "log":
        if lo <= 0:
            raise ValueError("log spacing needs a positive lower edge")
        nodes = np.geomspace(lo, hi, n_nodes)
    elif spacing == "uniform":
        nodes = np.linspace(lo, hi, n_nodes)
    else:
        raise ValueError(f"unknown spacing {spacing!r}")
    nodes[0], nodes[-1] = lo, hi

    alpha = problem.discount
    h = np.diff(nodes)
    h_m, h_p = h[:-1], h[1:]
    xin = nodes[1:-1]

    shape = (2, n_nodes)
    w_lo = np.zeros(shape)
    w_hi = np.zeros(shape)
    run = np.zeros(shape)
    gamma = np.zeros(shape)
    dt = np.zeros(shape)

    for i in (0, 1):
        spec = problem.regime(i)
        b = np.asarray(spec.drift(xin), dtype=float)
        half_var = 0.5 * np.asarray(spec.vol(xin), dtype=float) ** 2
        diff_lo = 2.0 * half_var / (h_m * (h_m + h_p))
        diff_hi = 2.0 * half_var / (h_p * (h_m + h_p))
        # central first-derivative weights on a possibly nonuniform stencil
        cen_lo = diff_lo - b * h_p / (h_m * (h_m + h_p))
        cen_hi = diff_hi + b * h_m / (h_p * (h_m + h_p))
        up_lo = diff_lo + np.where(b < 0.0, -b / h_m, 0.0)
        up_hi = diff_hi + np.where(b > 0.0, b / h_p, 0.0)
        if drift_scheme == "central":
            rate_lo, rate_hi = cen_lo, cen_hi
        elif drift_scheme == "upwind":
            rate_lo, rate_hi = up_lo, up_hi
        else:
            bad = (cen_lo < 0.0) | (cen_hi < 0.0)
            rate_lo = np.where(bad, up_lo, cen_lo)
            rate_hi = np.where(bad, up_hi, cen_hi)
        hold = 1.0 / (rate_lo + rate_hi)
        disc = 1.0 / (1.0 + alpha * hold)
        w_lo[i, 1:-1] = disc * rate_lo * hold
        w_hi[i, 1:-1] = disc * rate_hi * hold
        run[i, 1:-1] = disc * hold * np.asarray(problem.reward(i, xin), dtype=float)
        gamma[i, 1:-1] = disc
        dt[i, 1:-1] = hold

    backstop = np.zeros((2, 2))
    for i in (0, 1):
        g = None
        for side, edge, end in ((0, lo, problem.lower), (1, hi, problem.upper)):
            if end.kind == "absorbing" and edge == end.position:
                backstop[i, side] = float(problem.reward(i, edge)) / alpha
            else:
                if g is None:
                    g = no_switch_value(problem, i)
                backstop[i, side] = float(g.g(edge))

    return GridScheme(
        nodes=nodes,
        spacing=spacing,
        w_lo=w_lo,
        w_hi=w_hi,
        run=run,
        gamma=gamma,
        dt=dt,
        backstop=backstop,
    )


# --------------------------------------------------------------------------
# Optimal stopping on the chain
# --------------------------------------------------------------------------

_MAX_POLICY_ROUNDS = 100


def _masked_solve(w_lo, w_hi, rhs_cont, resolved, resolved_values):
    """Solve the linear system of a fixed continue/stop partition.

    Continuation rows read u_j = rhs_j + w_lo u_{j-1} + w_hi u_{j+1};
    resolved rows pin u_j to a known value.  The matrix is strictly
    diagonally dominant because the discounted weights sum below one.
    """
    n = len(rhs_cont)
    sub = -w_lo.copy()
    sup = -w_hi.copy()
    sub[resolved] = 0.0
    sup[resolved] = 0.0
    ab = np.zeros((3, n))
    ab[0, 1:] = sup[:-1]
    ab[1, :] = 1.0
    ab[2, :-1] = sub[1:]
    rhs = np.where(resolved, resolved_values, rhs_cont)
    return solve_banded((1, 1), ab, rhs)


def _stopping_value(grid, regime, obstacle, warm_stop):
    """Exact value of the chain's stopping problem against ``obstacle``.

    Policy iteration on the stop set: solve the linear system of the
    current partition, re-derive the partition from the solved values,
    repeat until it is stable.  Returns the values and the final stop
    mask (edges excluded from the mask; they are handled separately).
    """
    w_lo, w_hi, run = grid.w_lo[regime], grid.w_hi[regime], grid.run[regime]
    n = grid.n_nodes
    edge_vals = (
        max(grid.backstop[regime, 0], obstacle[0]),
        max(grid.backstop[regime, 1], obstacle[-1]),
    )
    stop = np.zeros(n, dtype=bool) if warm_stop is None else warm_stop.copy()
    stop[0] = stop[-1] = False

    resolved_values = np.where(stop, obstacle, 0.0)
    resolved_values[0], resolved_values[-1] = edge_vals
    u = None
    for _ in range(_MAX_POLICY_ROUNDS):
        resolved = stop.copy()
        resolved[0] = resolved[-1] = True
        resolved_values = np.where(stop, obstacle, 0.0)
        resolved_values[0], resolved_values[-1] = edge_vals
        u = _masked_solve(w_lo, w_hi, run, resolved, resolved_values)
        cont = run.copy()
        cont[1:-1] += w_lo[1:-1] * u[:-2] + w_hi[1:-1] * u[2:]
        new_stop = obstacle > cont + 1e-12 * (1.0 + np.abs(cont))
        new_stop[0] = new_stop[-1] = False
        if np.array_equal(new_stop, stop):
            break
        stop = new_stop
    return u, stop


def _never_switch_values(grid):
    """Pure-continuation values on the chain, one per regime.

    These seed the iteration; using the chain's own resolvent (rather
    than the exact no-switch functions) keeps the subsequent iterates
    monotone to rounding, since every later sweep improves within the
    same discrete dynamics.
    """
    out = []
    none_resolved = np.zeros(grid.n_nodes, dtype=bool)
    none_resolved[0] = none_resolved[-1] = True
    for i in (0, 1):
        vals = np.zeros(grid.n_nodes)
        vals[0], vals[-1] = grid.backstop[i]
        out.append(
            _masked_solve(grid.w_lo[i], grid.w_hi[i], grid.run[i], none_resolved, vals)
        )
    return out[0], out[1]


# --------------------------------------------------------------------------
# The coupled iteration
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class IterationReport:
    """Outcome of one value-iteration run.

    ``w`` / ``y`` are the open / closed regime values on ``nodes``;
    ``increments`` holds the sup-norm change of each sweep and
    ``min_increment`` the most negative nodewise step observed anywhere
    (monotone iterations keep it above roundoff).  ``stop_w`` marks the
    nodes where the open regime switches closed, ``stop_y`` the closed
    nodes that switch open.  ``comparison_gap`` is filled when a solved
    reference was supplied: the sup of nodewise relative gaps over the
    interior, one entry per regime.
    """

    nodes: np.ndarray
    w: np.ndarray
    y: np.ndarray
    n: int
    increments: tuple[float, ...]
    min_increment: float
    converged: bool
    stop_w: np.ndarray
    stop_y: np.ndarray
    comparison_gap: tuple[float, float] | None

    def value(self, regime: int, x):
        """Linear interpolation of the converged iterate."""
        if regime not in (0, 1):
            raise ValueError(f"regime must be 0 or 1, got {regime}")
        arr = self.y if regime == 0 else self.w
        return np.interp(x, self.nodes, arr)


def _check_scheme(grid: GridScheme) -> None:
    if np.any(grid.w_lo < 0.0) or np.any(grid.w_hi < 0.0):
        raise SchemeUnstable(
            "negative transition weight: refine the grid or use upwind drift"
        )
    row = grid.w_lo + grid.w_hi
    if np.any(row > 1.0 + 1e-12):
        raise SchemeUnstable("discounted row sums exceed one")
    if np.any(np.diff(grid.nodes) <= 0.0):
        raise SchemeUnstable("grid nodes must be strictly increasing")


def value_iteration(
    problem: SwitchingProblem,
    grid: GridScheme,
    n_max: int = 400,
    tol: float = 1e-9,
    *,
    solution=None,
) -> IterationReport:
    """Iterate the coupled stopping problems on the chain to their fixed
    point.

    Each sweep replaces ``w`` by the value of stopping against
    ``y - cost_close`` under the open dynamics (earning the running
    reward until then), and ``y`` by stopping against ``w - cost_open``
    under the closed dynamics; both updates read the previous sweep's
    iterates.  Stops when the sup-norm increment falls below ``tol`` or
    after ``n_max`` sweeps.

    When ``solution`` (a solved reference with v0/v1 evaluators) is
    given, the report records the interior relative gap to it; the grid
    should then cover both thresholds with margin.
    """
    problem = validate_problem(problem)
    _check_scheme(grid)
    nodes = grid.nodes
    cost_close = np.asarray(problem.switch_cost(0, nodes), dtype=float)
    cost_open = np.asarray(problem.switch_cost(1, nodes), dtype=float)

    y, w = _never_switch_values(grid)
    mask_w = mask_y = None
    increments: list[float] = []
    min_increment = math.inf
    converged = False
    sweeps = 0
    while sweeps < n_max:
        sweeps += 1
        w_new, mask_w = _stopping_value(grid, 1, y - cost_close, mask_w)
        y_new, mask_y = _stopping_value(grid, 0, w - cost_open, mask_y)
        dw = w_new - w
        dy = y_new - y
        min_increment = min(min_increment, float(dw.min()), float(dy.min()))
        inc = max(float(np.abs(dw).max()), float(np.abs(dy).max()))
        increments.append(inc)
        w, y = w_new, y_new
        if inc < tol:
            converged = True
            break

    comparison = None
    if solution is not None:
        margin = max(3, grid.n_nodes // 20)
        sl = slice(margin, grid.n_nodes - margin)
        v0 = np.asarray(solution.v0(nodes[sl]), dtype=float)
        v1 = np.asarray(solution.v1(nodes[sl]), dtype=float)
        gap0 = float(np.max(np.abs(y[sl] - v0) / (1.0 + np.abs(v0))))
        gap1 = float(np.max(np.abs(w[sl] - v1) / (1.0 + np.abs(v1))))
        comparison = (gap0, gap1)

    return IterationReport(
        nodes=nodes,
        w=w,
        y=y,
        n=sweeps,
        increments=tuple(increments),
        min_increment=min_increment,
        converged=converged,
        stop_w=mask_w if mask_w is not None else np.zeros(grid.n_nodes, dtype=bool),
        stop_y=mask_y if mask_y is not None else np.zeros(grid.n_nodes, dtype=bool),
        comparison_gap=comparison,
    )
