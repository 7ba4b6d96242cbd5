"""Monte Carlo oracle: simulate a threshold policy against the raw
objective.

Paths are advanced with exact transition sampling (geometric Brownian
motion in log space, Ornstein-Uhlenbeck in natural coordinates), so the
only discretization left is that switching and absorption are detected
on the dt grid.  Running reward is accumulated as the exact conditional
expectation of the discounted integral over each step given its start
state, which makes the estimator unbiased for the dt-grid policy; for a
policy that never triggers, every path averages to exactly the no-switch
value.  Far from all triggers the step length is raised by powers of
two (the transition laws are exact at any step), falling back to single
dt steps near thresholds; see :mod:`startstop.oracle._kernels` for the
admission rule.

Scope: the kernel needs closed-form transitions and resolvents, so this
oracle accepts GBM or OU dynamics, affine rewards, and constant costs.
That covers what the direct solver is checked against; anything more
exotic already has the grid oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..model import (
    AffineReward,
    ConstantCost,
    GeometricBM,
    OrnsteinUhlenbeck,
    SwitchingProblem,
    ThresholdPolicy,
    validate_problem,
)
from ._kernels import run_paths

__all__ = ["SimulationEstimate", "simulate_policy"]

_BLOCK_LEVELS = 17          # block sizes dt * 2^k for k = 0 .. 16
_DISC_CUTOFF = 1e-10
_TRIGGER_SIGMAS = 7.0


@dataclass(frozen=True)
class SimulationEstimate:
    """Sample summary of one policy simulation.

    ``mean`` estimates the expected discounted reward net of switching
    costs from the requested start; ``standard_error`` is the sample
    standard deviation over the square root of the path count.
    ``horizon`` is the effective truncation time actually applied (the
    requested horizon capped by the discount cutoff).
    """

    mean: float
    standard_error: float
    paths: int
    dt: float
    horizon: float
    switches_mean: float
    switches_max: int
    absorbed_fraction: float
    seed: int

    def interval(self, width: float = 3.0) -> tuple[float, float]:
        """Symmetric ``width``-standard-error band around the mean."""
        half = width * self.standard_error
        return (self.mean - half, self.mean + half)


def _dynamics(problem, i):
    fam = problem.regime(i).family
    if isinstance(fam, GeometricBM):
        return 0, fam.drift, 0.0, fam.vol
    if isinstance(fam, OrnsteinUhlenbeck):
        return 1, fam.reversion_speed, fam.level, fam.vol
    raise ValueError(
        f"regime {i}: exact transition sampling needs GBM or OU dynamics, "
        f"got {type(fam).__name__}"
    )


def _reward_coefficients(problem):
    reward = problem.running_reward
    if not isinstance(reward, AffineReward):
        raise ValueError(
            f"simulation needs an affine running reward, got {type(reward).__name__}"
        )
    return reward.slope, reward.intercept


def _constant_cost(cost, name):
    if not isinstance(cost, ConstantCost):
        raise ValueError(f"simulation needs a constant {name}, got {type(cost).__name__}")
    return cost.value


def _representation(code, x):
    """Map a state into the coordinate the kernel walks for this family."""
    if code == 0:
        if x <= 0.0:
            return -math.inf
        return math.log(x)
    return float(x)


def simulate_policy(
    problem: SwitchingProblem,
    policy: ThresholdPolicy,
    x0: float,
    start_regime: int,
    paths: int = 100_000,
    dt: float = 1e-3,
    horizon: float = math.inf,
    *,
    seed: int = 20240,
) -> SimulationEstimate:
    """Estimate the value of ``policy`` from ``(x0, start_regime)``.

    The policy closes (pays ``cost_close``) when the open state is at or
    below ``policy.a`` and opens (pays ``cost_open``) when the closed
    state is at or above ``policy.b``, both checked on the dt grid.
    Paths truncate when the discount factor drops below 1e-10 or at
    ``horizon``, closing the tail with the no-switch value; absorbing
    endpoints end the path with the stuck payoff.
    """
    problem = validate_problem(problem)
    policy.check(problem.interval)
    if start_regime not in (0, 1):
        raise ValueError(f"start_regime must be 0 or 1, got {start_regime}")
    c, d = problem.interval
    if not (c < x0 < d):
        raise ValueError(f"x0 must lie inside the state interval, got {x0}")
    if paths < 2:
        raise ValueError("need at least two paths for a standard error")
    if dt <= 0.0 or not horizon > 0.0:
        raise ValueError("dt and horizon must be positive")

    alpha = problem.discount
    slope, icept = _reward_coefficients(problem)
    cost_close = _constant_cost(problem.cost_close, "cost_close")
    cost_open = _constant_cost(problem.cost_open, "cost_open")

    taus = dt * np.exp2(np.arange(_BLOCK_LEVELS))
    shape = (2, _BLOCK_LEVELS)
    fam = np.zeros(2, dtype=np.int64)
    level = np.zeros(2)
    step_a = np.zeros(shape)
    step_sd = np.zeros(shape)
    dreq = np.zeros(shape)
    gapshrink = np.zeros(shape)
    rx = np.zeros(shape)
    rc = np.zeros(shape)
    g_a = np.zeros(2)
    g_b = np.zeros(2)
    decay = -np.expm1(-alpha * taus) / alpha  # (1 - e^{-alpha tau})/alpha

    for i in (0, 1):
        code, pa, pb, vol = _dynamics(problem, i)
        fam[i] = code
        if code == 0:
            mu = pa - 0.5 * vol * vol
            step_a[i] = mu * taus
            step_sd[i] = vol * np.sqrt(taus)
            dreq[i] = _TRIGGER_SIGMAS * step_sd[i] + abs(mu) * taus
            if i == 1:
                # discount > drift is enforced at validation
                rx[i] = slope * -np.expm1(-(alpha - pa) * taus) / (alpha - pa)
                rc[i] = icept * decay
                g_b[i] = slope / (alpha - pa)
                g_a[i] = icept / alpha
        else:
            level[i] = pb
            step_a[i] = np.exp(-pa * taus)
            step_sd[i] = vol * np.sqrt(-np.expm1(-2.0 * pa * taus) / (2.0 * pa))
            dreq[i] = _TRIGGER_SIGMAS * step_sd[i]
            gapshrink[i] = -np.expm1(-pa * taus)
            if i == 1:
                mixed = -np.expm1(-(alpha + pa) * taus) / (alpha + pa)
                rx[i] = slope * mixed
                rc[i] = slope * pb * (decay - mixed) + icept * decay
                g_b[i] = slope / (alpha + pa)
                g_a[i] = slope * pb * (1.0 / alpha - 1.0 / (alpha + pa)) + icept / alpha

    discf = np.exp(-alpha * taus)

    thr_a = np.array([_representation(fam[i], policy.a) for i in (0, 1)])
    thr_b = np.array([_representation(fam[i], policy.b) for i in (0, 1)])
    thr_lo = np.array([_representation(fam[i], c) for i in (0, 1)])
    thr_hi = np.array([_representation(fam[i], d) for i in (0, 1)])
    lower_absorbing = int(problem.lower.kind == "absorbing" and math.isfinite(c))
    upper_absorbing = int(problem.upper.kind == "absorbing" and math.isfinite(d))
    absorb_lo = np.zeros(2)
    absorb_hi = np.zeros(2)
    if lower_absorbing:
        for i in (0, 1):
            absorb_lo[i] = float(problem.reward(i, c)) / alpha
    if upper_absorbing:
        for i in (0, 1):
            absorb_hi[i] = float(problem.reward(i, d)) / alpha

    t_cut = math.log(1.0 / _DISC_CUTOFF) / alpha
    t_end = min(horizon, t_cut) if math.isfinite(horizon) else t_cut
    max_steps = np.int64(math.ceil(t_end / dt))

    out_vals = np.empty(paths)
    out_sw = np.empty(paths, dtype=np.int64)
    out_abs = np.empty(paths, dtype=np.int64)
    run_paths(
        np.int64(paths),
        np.int64(seed),
        _representation(fam[start_regime], x0),
        np.int64(start_regime),
        max_steps,
        np.int64(_BLOCK_LEVELS - 1),
        _DISC_CUTOFF,
        fam,
        level,
        thr_a,
        thr_b,
        thr_lo,
        thr_hi,
        np.int64(lower_absorbing),
        np.int64(upper_absorbing),
        absorb_lo,
        absorb_hi,
        step_a,
        step_sd,
        dreq,
        gapshrink,
        rx,
        rc,
        discf,
        cost_close,
        cost_open,
        g_a,
        g_b,
        out_vals,
        out_sw,
        out_abs,
    )

    mean = float(out_vals.mean())
    se = float(out_vals.std(ddof=1) / math.sqrt(paths))
    return SimulationEstimate(
        mean=mean,
        standard_error=se,
        paths=paths,
        dt=dt,
        horizon=float(max_steps) * dt,
        switches_mean=float(out_sw.mean()),
        switches_max=int(out_sw.max()),
        absorbed_fraction=float(out_abs.mean()),
        seed=seed,
    )
