"""Expected discounted reward when the controller never switches.

Starting closed this is identically zero (no reward accrues).  Starting
open it is the resolvent of the running reward under the open dynamics.
Affine rewards under GBM or OU dynamics have one-line closed forms;
anything else goes through the Green-function representation built from
the fundamental pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad

from .fundamentals import Fundamentals, build_fundamentals
from .model import AffineReward, GeometricBM, OrnsteinUhlenbeck, ValidatedProblem

__all__ = [
    "NoSwitchValue",
    "no_switch_value",
    "NoSwitchError",
    "ResolventDivergence",
]


class NoSwitchError(ArithmeticError):
    pass


class ResolventDivergence(NoSwitchError):
    """The reward grows too fast for its discounted integral to be finite."""


@dataclass(frozen=True)
class NoSwitchValue:
    regime: int
    g: Callable
    dg: Callable
    closed_form: Optional[str]  # "zero" | "gbm-affine" | "ou-affine" | None

    def __call__(self, x):
        return self.g(x)


def _zero_value(regime: int) -> NoSwitchValue:
    return NoSwitchValue(
        regime=regime,
        g=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        dg=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        closed_form="zero",
    )


# quadrature controls: probe the integrand outward in doubling blocks and
# truncate once it falls this far below its running peak
_TRUNCATION_RATIO = 1e-14
_MAX_DOUBLINGS = 60


def _quadrature_value(problem: ValidatedProblem, regime: int,
                      fund: Fundamentals) -> NoSwitchValue:
    spec = problem.regime(regime)
    c, d = problem.interval

    def weight(xi):
        sig = float(spec.vol(xi))
        return 2.0 / (sig * sig * float(fund.wronskian(xi)))

    def psi_side(xi):
        return float(fund.psi(xi)) * float(problem.reward(regime, xi)) * weight(xi)

    def phi_side(xi):
        return float(fund.phi(xi)) * float(problem.reward(regime, xi)) * weight(xi)

    x_ref = _reference_point(c, d)
    upper_cut = _find_cutoff(phi_side, x_ref, d, going_up=True)
    lower_cut = _find_cutoff(psi_side, x_ref, c, going_up=False)

    def _split(x):
        lo = _quad_piecewise(psi_side, lower_cut, x)
        hi = _quad_piecewise(phi_side, x, upper_cut)
        return lo, hi

    def g(x):
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty_like(xs)
        for i, xi in enumerate(xs):
            lo, hi = _split(xi)
            out[i] = float(fund.phi(xi)) * lo + float(fund.psi(xi)) * hi
        return out.reshape(np.shape(x)) if np.shape(x) else float(out[0])

    def dg(x):
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty_like(xs)
        for i, xi in enumerate(xs):
            lo, hi = _split(xi)
            out[i] = float(fund.dphi(xi)) * lo + float(fund.dpsi(xi)) * hi
        return out.reshape(np.shape(x)) if np.shape(x) else float(out[0])

    return NoSwitchValue(regime=regime, g=g, dg=dg, closed_form=None)


def _quad_piecewise(fn, lo: float, hi: float) -> float:
    """Adaptive quadrature, split into geometric blocks when the range
    spans many scales (a single call tends to miss integrand mass that is
    concentrated near the small end)."""
    if hi <= lo:
        return 0.0
    if lo > 0.0 and hi / lo > 16.0:
        edges = [lo]
        while edges[-1] * 4.0 < hi:
            edges.append(edges[-1] * 4.0)
        edges.append(hi)
        return sum(
            quad(fn, a, b, limit=100, epsabs=1e-14, epsrel=1e-10)[0]
            for a, b in zip(edges, edges[1:])
        )
    return quad(fn, lo, hi, limit=200, epsabs=1e-13, epsrel=1e-11)[0]


def _reference_point(c: float, d: float) -> float:
    if math.isfinite(c) and math.isfinite(d):
        return 0.5 * (c + d)
    if math.isfinite(c):
        return c + 1.0
    if math.isfinite(d):
        return d - 1.0
    return 0.0


def _find_cutoff(integrand, start: float, endpoint: float, going_up: bool) -> float:
    """March toward the endpoint in doubling blocks until the integrand's
    contribution is negligible against its peak.  A tail that refuses to
    decay means the discounted integral is infinite."""
    if math.isfinite(endpoint):
        return endpoint
    step = 1.0
    pos = start
    peak = abs(integrand(start)) + 1e-300
    val = peak
    for _ in range(_MAX_DOUBLINGS):
        pos = pos + step if going_up else pos - step
        val = abs(integrand(pos))
        peak = max(peak, val)
        if val < _TRUNCATION_RATIO * peak:
            return pos
        step *= 2.0
    raise ResolventDivergence(
        f"reward integrand does not decay toward {'+' if going_up else '-'}inf "
        f"(last value {val:.3e} vs peak {peak:.3e}); "
        "the no-switch value is infinite"
    )


def no_switch_value(problem: ValidatedProblem, regime: int,
                    fund: Optional[Fundamentals] = None) -> NoSwitchValue:
    """g for one starting regime, closed form when recognized.

    Raises ResolventDivergence at construction time when the quadrature
    route detects non-integrable reward growth.
    """
    if regime == 0:
        return _zero_value(0)

    fam = problem.regime(regime).family
    if isinstance(problem.running_reward, AffineReward):
        s, q = problem.running_reward.slope, problem.running_reward.intercept
        alpha = problem.discount
        if isinstance(fam, GeometricBM):
            slope = s / (alpha - fam.drift)
            intercept = q / alpha

            def g(x):
                return slope * np.asarray(x, dtype=float) + intercept

            def dg(x):
                return np.full_like(np.asarray(x, dtype=float), slope)

            return NoSwitchValue(regime=regime, g=g, dg=dg, closed_form="gbm-affine")
        if isinstance(fam, OrnsteinUhlenbeck):
            kappa, delta = fam.level, fam.reversion_speed
            slope = s / (alpha + delta)
            intercept = (s * kappa + q) / alpha - slope * kappa

            def g(x):
                return slope * np.asarray(x, dtype=float) + intercept

            def dg(x):
                return np.full_like(np.asarray(x, dtype=float), slope)

            return NoSwitchValue(regime=regime, g=g, dg=dg, closed_form="ou-affine")

    if fund is None:
        fund = build_fundamentals(problem, regime)
    return _quadrature_value(problem, regime, fund)
