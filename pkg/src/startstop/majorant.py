"""Obstacles, their transformed versions, boundary-limit classification,
and tangency solving.

Each regime's candidate value is determined by the smallest line through a
known anchor that majorizes a transformed obstacle.  Regime 0 works in the
increasing coordinate y = F0(x) with obstacle R0 = (r0/phi0) o F0^-1 and an
anchor at the lower end; regime 1 works in y = G1(x) with R1 = (r1/psi1) o
G1^-1 anchored at the upper end.  The line's slope is the beta coefficient
of the candidate value, and the point of tangency is the switching
threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .fundamentals import Fundamentals, GBMExponents, OUCylinder
from .model import ConstantCost, ValidatedProblem
from .noswitch import NoSwitchValue

__all__ = [
    "BoundaryLimit",
    "BoundaryLimits",
    "Obstacle",
    "TransformedObstacle",
    "TangencyResult",
    "NoSwitchSignal",
    "classify_boundary_limits",
    "build_obstacle",
    "transform",
    "concavity_sign",
    "tangency",
    "MajorantError",
    "InconclusiveLimit",
    "MultipleTangencies",
    "BracketFailure",
]


class MajorantError(ArithmeticError):
    pass


class InconclusiveLimit(MajorantError):
    """The boundary ratio sequence neither decays nor diverges cleanly."""


class MultipleTangencies(MajorantError):
    """The majorant touches the obstacle in more than one place, so the
    continuation region is not a single interval."""


class BracketFailure(MajorantError):
    pass


# --------------------------------------------------------------------------
# Boundary-limit classification
# --------------------------------------------------------------------------

_LIMIT_POINTS = 40
_DECAY_TOL = 1e-8
_BLOWUP_TOL = 1e8

# Hermite evaluations overflow past |z| ~ 26; stay a little inside.
_OU_Z_CAP = 24.0


@dataclass(frozen=True)
class BoundaryLimit:
    kind: str  # "zero" | "finite_positive" | "infinite" | "absorbing"
    value: Optional[float] = None


@dataclass(frozen=True)
class BoundaryLimits:
    l_c: BoundaryLimit
    l_d: BoundaryLimit

    @property
    def any_infinite(self) -> bool:
        return self.l_c.kind == "infinite" or self.l_d.kind == "infinite"


def _reward_scale_point(problem: ValidatedProblem) -> float:
    """A state around which the problem's features live, used to place
    scan grids."""
    reward = problem.running_reward
    slope = getattr(reward, "slope", None)
    if slope:
        root = -reward.intercept / slope
        if math.isfinite(root) and root > 0:
            return max(root, 1e-2)
    c, d = problem.interval
    if math.isfinite(c) and math.isfinite(d):
        return 0.5 * (c + d)
    return 1.0

def _approach_upper(problem: ValidatedProblem, fund: Fundamentals) -> np.ndarray:
    c, d = problem.interval
    if isinstance(fund.closed_form, OUCylinder):
        tag = fund.closed_form
        return tag.center + np.geomspace(0.5, _OU_Z_CAP, _LIMIT_POINTS) / tag.scale
    if math.isinf(d):
        x_ref = _reward_scale_point(problem)
        return x_ref * np.geomspace(1e1, 1e40, _LIMIT_POINTS)
    return d - (d - c) * np.geomspace(0.25, 1e-10, _LIMIT_POINTS)


def _approach_lower(problem: ValidatedProblem, fund: Fundamentals) -> np.ndarray:
    c, d = problem.interval
    if isinstance(fund.closed_form, OUCylinder) and math.isinf(c):
        tag = fund.closed_form
        return tag.center - np.geomspace(0.5, _OU_Z_CAP, _LIMIT_POINTS) / tag.scale
    if c == 0.0 and isinstance(fund.closed_form, GBMExponents):
        x_ref = _reward_scale_point(problem)
        return x_ref * np.geomspace(1e-1, 1e-100, _LIMIT_POINTS)
    return c + (d - c) * np.geomspace(0.25, 1e-10, _LIMIT_POINTS)


def _classify_sequences(seq_a: np.ndarray, seq_b: np.ndarray, where: str) -> BoundaryLimit:
    last_a, last_b = seq_a[-1], seq_b[-1]
    if not (np.isfinite(last_a) and np.isfinite(last_b)):
        return BoundaryLimit("infinite")
    if last_a < _DECAY_TOL and last_b < _DECAY_TOL:
        return BoundaryLimit("zero")
    if last_a > _BLOWUP_TOL or last_b > _BLOWUP_TOL:
        return BoundaryLimit("infinite")
    for seq in (seq_a, seq_b):
        if seq[-1] < _DECAY_TOL:
            continue
        tail = seq[-10:]
        diffs = np.diff(tail)
        monotone = np.all(diffs <= 0) or np.all(diffs >= 0)
        nearly_flat = np.ptp(tail) <= 0.05 * max(abs(tail[-1]), 1e-300)
        if not (monotone or nearly_flat):
            raise InconclusiveLimit(
                f"ratio sequence at {where} oscillates: tail {tail[-4:]}"
            )
    return BoundaryLimit("finite_positive", float(max(last_a, last_b)))


def classify_boundary_limits(
    problem: ValidatedProblem,
    funds: tuple[Fundamentals, Fundamentals],
    gs: tuple[NoSwitchValue, NoSwitchValue],
) -> BoundaryLimits:
    """Decide whether each natural boundary forces a zero, finite, or
    infinite limit on the transformed obstacles.  Absorbing endpoints are
    skipped; their anchors carry the boundary information instead."""
    fund0, fund1 = funds
    g0, g1 = gs

    if problem.lower.kind == "absorbing":
        l_c = BoundaryLimit("absorbing")
    else:
        xs = _approach_lower(problem, fund0)
        with np.errstate(over="ignore", under="ignore", divide="ignore", invalid="ignore"):
            K0 = np.asarray(g1.g(xs)) - np.asarray(g0.g(xs)) - problem.switch_cost(1, xs)
            seq_a = np.maximum(K0, 0.0) / fund0.phi(xs)
            seq_b = np.asarray(fund1.phi(xs)) / np.asarray(fund0.phi(xs))
        l_c = _classify_sequences(seq_a, seq_b, "the lower boundary")

    if problem.upper.kind == "absorbing":
        l_d = BoundaryLimit("absorbing")
    else:
        xs = _approach_upper(problem, fund1)
        with np.errstate(over="ignore", under="ignore", divide="ignore", invalid="ignore"):
            K1 = np.asarray(g0.g(xs)) - np.asarray(g1.g(xs)) - problem.switch_cost(0, xs)
            seq_a = np.maximum(K1, 0.0) / fund1.psi(xs)
            seq_b = np.asarray(fund0.psi(xs)) / np.asarray(fund1.psi(xs))
        l_d = _classify_sequences(seq_a, seq_b, "the upper boundary")

    return BoundaryLimits(l_c=l_c, l_d=l_d)


# --------------------------------------------------------------------------
# Obstacles and their transforms
# --------------------------------------------------------------------------

def _cost_derivative(cost, x):
    if isinstance(cost, ConstantCost):
        return np.zeros_like(np.asarray(x, dtype=float))
    x = np.asarray(x, dtype=float)
    h = 1e-6 * np.maximum(np.abs(x), 1.0)
    return (np.asarray(cost(x + h)) - np.asarray(cost(x - h))) / (2.0 * h)


@dataclass(frozen=True)
class Obstacle:
    """r = K_part + beta_other * (psi0 or -phi1), in the coordinates of
    ``regime``'s stopping problem."""

    regime: int
    beta_other: float
    r: Callable
    dr: Callable
    K_part: Callable
    own_fund: Fundamentals
    other_fund: Fundamentals
    problem: ValidatedProblem


def build_obstacle(
    problem: ValidatedProblem,
    funds: tuple[Fundamentals, Fundamentals],
    gs: tuple[NoSwitchValue, NoSwitchValue],
    regime: int,
    beta_other: float,
) -> Obstacle:
    fund0, fund1 = funds
    g0, g1 = gs
    beta = float(beta_other)

    if regime == 0:
        # switching 0 -> 1 costs H(., 1); the opposing value contributes
        # -beta1 * phi1
        def K_part(x):
            return np.asarray(g1.g(x)) - np.asarray(g0.g(x)) - problem.switch_cost(1, x)

        def dK(x):
            return np.asarray(g1.dg(x)) - np.asarray(g0.dg(x)) \
                - _cost_derivative(problem.cost_open, x)

        def r(x):
            return K_part(x) - beta * np.asarray(fund1.phi(x))

        def dr(x):
            return dK(x) - beta * np.asarray(fund1.dphi(x))

        own, other = fund0, fund1
    else:
        def K_part(x):
            return np.asarray(g0.g(x)) - np.asarray(g1.g(x)) - problem.switch_cost(0, x)

        def dK(x):
            return np.asarray(g0.dg(x)) - np.asarray(g1.dg(x)) \
                - _cost_derivative(problem.cost_close, x)

        def r(x):
            return K_part(x) + beta * np.asarray(fund0.psi(x))

        def dr(x):
            return dK(x) + beta * np.asarray(fund0.dpsi(x))

        own, other = fund1, fund0

    return Obstacle(
        regime=regime, beta_other=beta, r=r, dr=dr, K_part=K_part,
        own_fund=own, other_fund=other, problem=problem,
    )


@dataclass(frozen=True)
class TransformedObstacle:
    """The obstacle divided by its denominator and read in the transformed
    coordinate, plus the x-space machinery the tangency solver uses."""

    obstacle: Obstacle
    R: Callable                  # of the transformed coordinate y
    anchor: tuple[float, float]  # (coordinate, value)
    domain: tuple[float, float]  # (anchor coordinate, far coordinate)
    coord: Callable              # y(x)
    Q: Callable                  # R(y(x)) evaluated directly in x
    slope_m: Callable            # dR/dy as a function of x
    residual_T: Callable         # tangency residual as a function of x
    scan_window: tuple[float, float]


def _scan_window(problem: ValidatedProblem, funds) -> tuple[float, float]:
    c, d = problem.interval
    tags = [f.closed_form for f in funds]
    if all(isinstance(t, OUCylinder) for t in tags):
        lo = max(t.center - _OU_Z_CAP / t.scale for t in tags)
        hi = min(t.center + _OU_Z_CAP / t.scale for t in tags)
        span = hi - lo
        return (max(c + 1e-9 * span, lo), min(d - 1e-9 * span, hi) if math.isfinite(d) else hi)
    if all(isinstance(t, GBMExponents) for t in tags):
        x_ref = _reward_scale_point(problem)
        lo = x_ref * 1e-4 if c == 0 else max(c * (1 + 1e-9), x_ref * 1e-4)
        hi = x_ref * 1e4 if math.isinf(d) else d * (1 - 1e-9)
        return (max(lo, c + 0.0), hi)
    if not (math.isfinite(c) and math.isfinite(d)):
        raise MajorantError(
            "scan windows for mixed or custom regime families need a "
            "bounded state interval"
        )
    span = d - c
    return (c + 1e-6 * span, d - 1e-6 * span)


def transform(obstacle: Obstacle) -> TransformedObstacle:
    fund = obstacle.own_fund
    problem = obstacle.problem
    c, d = problem.interval

    if obstacle.regime == 0:
        coord, inv = fund.F, fund.F_inv
        den, dden = fund.phi, fund.dphi
        y_anchor = fund.lower_F
        far = math.inf if math.isinf(d) else float(fund.F(d))
    else:
        coord, inv = fund.G, fund.G_inv
        den, dden = fund.psi, fund.dpsi
        y_anchor = fund.upper_G
        far = -math.inf if math.isinf(c) else float(fund.G(c))

    anchor_val = _anchor_value(obstacle)

    def Q(x):
        return np.asarray(obstacle.r(x)) / np.asarray(den(x))

    def slope_m(x):
        # products of fundamental solutions can overflow far from the
        # anchor; the resulting non-finite entries are filtered by callers
        with np.errstate(over="ignore", invalid="ignore"):
            num = np.asarray(obstacle.dr(x)) * np.asarray(den(x)) \
                - np.asarray(obstacle.r(x)) * np.asarray(dden(x))
            return num / np.asarray(fund.wronskian(x))

    def residual_T(x):
        return slope_m(x) * (np.asarray(coord(x)) - y_anchor) - (Q(x) - anchor_val)

    def R(y):
        return Q(inv(y))

    return TransformedObstacle(
        obstacle=obstacle, R=R, anchor=(y_anchor, anchor_val),
        domain=(y_anchor, far), coord=coord, Q=Q, slope_m=slope_m,
        residual_T=residual_T, scan_window=_scan_window(problem, (fund, obstacle.other_fund)),
    )


def _anchor_value(obstacle: Obstacle) -> float:
    """Anchor ordinate in transformed units.  Natural boundaries anchor at
    zero.  An absorbing endpoint pins the value function to zero there, so
    the transformed anchor is -g/denominator at the endpoint."""
    problem = obstacle.problem
    c, d = problem.interval
    if obstacle.regime == 0:
        if problem.lower.kind != "absorbing":
            return 0.0
        # g0 is identically zero, so this is exactly zero; written out in
        # full for the general shape
        g0_at_c = 0.0
        return -g0_at_c / float(obstacle.own_fund.phi(c))
    if problem.upper.kind != "absorbing":
        return 0.0
    raise MajorantError(
        "absorbing upper endpoints need the open-regime value pinned at d; "
        "only natural upper boundaries are supported"
    )


def concavity_sign(obstacle: Obstacle, x: float, tol: float = 1e-9) -> int:
    """Sign of (A - alpha) r at x, which matches the sign of the second
    derivative of the transformed obstacle."""
    problem = obstacle.problem
    spec = problem.regime(obstacle.regime)
    h = 1e-5 * max(abs(x), 1.0)
    dr = float(obstacle.dr(x))
    d2r = (float(obstacle.dr(x + h)) - float(obstacle.dr(x - h))) / (2.0 * h)
    mu = float(spec.drift(x))
    sig = float(spec.vol(x))
    val = 0.5 * sig * sig * d2r + mu * dr - problem.discount * float(obstacle.r(x))
    scale = abs(0.5 * sig * sig * d2r) + abs(mu * dr) \
        + abs(problem.discount * float(obstacle.r(x))) + 1e-300
    if abs(val) <= tol * scale:
        return 0
    return 1 if val > 0 else -1


# --------------------------------------------------------------------------
# Tangency
# --------------------------------------------------------------------------

_SCAN_POINTS = 200
_RESIDUAL_TOL = 1e-12


class NoSwitchSignal:
    """Returned when no line through the anchor does better than never
    switching: the obstacle stays at or below the anchor level."""

    def __repr__(self):
        return "NoSwitchSignal()"


@dataclass(frozen=True)
class TangencyResult:
    beta: float
    y_star: float
    x_star: float


def _scan_states(transformed: TransformedObstacle) -> np.ndarray:
    """Scan grid ordered by increasing distance from the anchor coordinate.
    Regime 0 anchors at the lower end, so states ascend; regime 1 anchors
    at the upper end, so states descend."""
    lo, hi = transformed.scan_window
    obstacle = transformed.obstacle
    fund = obstacle.own_fund
    if isinstance(fund.closed_form, GBMExponents):
        xs = np.geomspace(lo, hi, _SCAN_POINTS)
        return xs if obstacle.regime == 0 else xs[::-1]
    # geometric offsets from the anchor-side edge keep early points dense
    # where the transformed coordinate still hugs the anchor; a uniform
    # component keeps the far field from thinning out
    span = hi - lo
    offsets = np.union1d(
        np.geomspace(span * 1e-7, span, _SCAN_POINTS - 60),
        np.linspace(span / 60.0, span, 60),
    )
    xs = (lo + offsets) if obstacle.regime == 0 else (hi - offsets)
    return np.clip(xs, lo, hi)


def tangency(transformed: TransformedObstacle):
    """Find the smallest line through the anchor that majorizes R.

    Returns a TangencyResult, or a NoSwitchSignal when the flat line
    through the anchor already majorizes.  Raises BracketFailure when the
    scan cannot isolate the touching point and MultipleTangencies when
    more than one touching cluster appears.
    """
    y_anchor, val_anchor = transformed.anchor
    xs = _scan_states(transformed)
    with np.errstate(over="ignore", invalid="ignore"):
        Q = np.asarray(transformed.Q(xs), dtype=float)
        ys = np.asarray(transformed.coord(xs), dtype=float)
    keep = np.isfinite(Q) & np.isfinite(ys)
    xs, Q, ys = xs[keep], Q[keep], ys[keep]
    if xs.size < 10:
        raise BracketFailure("scan grid collapsed to fewer than 10 usable points")

    # never worth hitting: the obstacle stays below the anchor level
    excess_rel = (Q - val_anchor) / (1.0 + np.abs(Q) + abs(val_anchor))
    if np.all(excess_rel <= 1e-13):
        return NoSwitchSignal()

    # only look past the transformed obstacle's minimum; the stretch before
    # it belongs to the other regime's switching region, where the obstacle
    # formula overstates the stopping payoff
    i_min = int(np.argmin(Q))
    if i_min >= len(xs) - 2:
        raise BracketFailure(
            "obstacle still decreasing at the far edge of the scan window; "
            "the interim slope is out of range"
        )
    T = np.asarray(transformed.residual_T(xs), dtype=float)
    crossing = None
    for i in range(i_min + 1, len(xs) - 1):
        if T[i] > 0.0 and T[i + 1] <= 0.0:
            crossing = i
            break
    if crossing is None:
        raise BracketFailure(
            "no sign change of the tangency residual beyond the obstacle's "
            f"minimum (window {transformed.scan_window}); the interim slope "
            "may be out of range"
        )

    x_star = _polish_root(transformed, xs[crossing], xs[crossing + 1])
    y_star = float(transformed.coord(x_star))
    # chord slope through the anchor; at a smooth tangency this equals the
    # local slope, and at a kink it is the correct supporting slope
    beta = (float(transformed.Q(x_star)) - val_anchor) / (y_star - y_anchor)

    _verify_beyond_tangency(transformed, beta, x_star)
    return TangencyResult(beta=beta, y_star=y_star, x_star=x_star)


def _verify_beyond_tangency(transformed: TransformedObstacle, beta: float,
                            x_star: float) -> None:
    """Scan the stretch between the tangency and the far window edge.

    Only this side can be checked at tangency time.  Between the anchor
    and the tangency the obstacle borrows the other regime's candidate
    value, which is a valid stopping payoff only beyond that regime's own
    threshold; before it the formula overstates the payoff and the line
    legitimately passes underneath.
    """
    lo, hi = transformed.scan_window
    regime = transformed.obstacle.regime
    far_edge = hi if regime == 0 else lo
    span = abs(far_edge - x_star)
    if span <= 1e-12 * (1.0 + abs(x_star)):
        return
    offsets = np.union1d(
        np.geomspace(span * 1e-7, span, _SCAN_POINTS - 60),
        np.linspace(span / 60.0, span, 60),
    )
    xs = x_star + offsets if regime == 0 else x_star - offsets
    xs = np.clip(xs, min(lo, hi), max(lo, hi))
    with np.errstate(over="ignore", invalid="ignore"):
        Q = np.asarray(transformed.Q(xs), dtype=float)
        ys = np.asarray(transformed.coord(xs), dtype=float)
    keep = np.isfinite(Q) & np.isfinite(ys)
    _verify_majorant(transformed, xs[keep], ys[keep], Q[keep], beta, x_star)


def _polish_root(transformed: TransformedObstacle, x_lo: float, x_hi: float) -> float:
    """Drive the bracketed tangency residual to a root.

    brentq handles the smooth case; a discontinuous residual (kinked
    obstacle) makes it collapse onto the jump instead, which is accepted
    when the sign change survives an epsilon-neighborhood probe."""
    T = transformed.residual_T

    def t_scalar(x):
        return float(T(x))

    lo, hi = sorted((x_lo, x_hi))
    x = float(brentq(t_scalar, lo, hi, xtol=1e-300, rtol=9e-16, maxiter=160))

    t_final = t_scalar(x)
    scale = abs(float(transformed.Q(x))) + abs(
        float(transformed.slope_m(x)) * (float(transformed.coord(x)) - transformed.anchor[0])
    ) + 1.0
    if abs(t_final) > _RESIDUAL_TOL * scale:
        # a jumping residual inside a vanishing neighborhood is a kink in
        # the obstacle; the supporting point is still well defined
        eps = 1e-12 * max(abs(x), 1e-12)
        if not (t_scalar(x - eps) > 0.0 >= t_scalar(x + eps)
                or t_scalar(x + eps) > 0.0 >= t_scalar(x - eps)):
            raise BracketFailure(
                f"tangency residual {t_final:.3e} did not reach tolerance at x={x}"
            )
    return x


def _verify_majorant(transformed, xs, ys, Q, beta, x_star):
    """The tangent line must stay above the obstacle on the given states,
    touching only at the tangency; a second touching point breaks the
    single-interval structure.

    Tolerances are pointwise relative: the obstacle can span many orders
    of magnitude along one scan."""
    y_anchor, val_anchor = transformed.anchor
    line = val_anchor + beta * (ys - y_anchor)
    with np.errstate(invalid="ignore"):
        rel_gap = (line - Q) / (1.0 + np.abs(Q) + np.abs(line))
    if np.nanmin(rel_gap) < -1e-9:
        raise BracketFailure(
            f"tangent line dips below the obstacle (relative gap "
            f"{float(np.nanmin(rel_gap)):.3e}); the first residual crossing "
            "was not the smallest majorant"
        )

    def rel_gap_at(x):
        q = float(transformed.Q(x))
        w = val_anchor + beta * (float(transformed.coord(x)) - y_anchor)
        return (w - q) / (1.0 + abs(q) + abs(w))

    x_tol = 1e-5 * (1.0 + abs(x_star))
    for i in range(1, len(xs) - 1):
        if not (rel_gap[i] <= rel_gap[i - 1] and rel_gap[i] <= rel_gap[i + 1]):
            continue
        if rel_gap[i] > 1e-3 or abs(xs[i] - x_star) <= x_tol:
            continue
        lo, hi = sorted((xs[i - 1], xs[i + 1]))
        res = minimize_scalar(rel_gap_at, bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-12 * (1.0 + abs(xs[i]))})
        if res.fun <= 1e-8 and abs(res.x - x_star) > x_tol:
            raise MultipleTangencies(
                f"the majorant also touches the obstacle near x={res.x:.6g} "
                f"in addition to x={x_star:.6g}; the continuation region is "
                "disconnected"
            )
