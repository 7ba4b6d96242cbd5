"""Coupled fixed point for the pair of switching thresholds.

The two regimes are linked: the idle regime's obstacle needs the open
regime's candidate value (through beta1) and vice versa (through beta0).
`solve` iterates the two tangency maps until beta1 stabilizes, the
approach suggested by the alternating structure of the problem;
`solve_simultaneous` reaches the same quadruple by a damped Newton
iteration on the pair of tangency equations in (a, b), and exists so the
two paths can be checked against each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .fundamentals import OutOfDomain, build_fundamentals
from .majorant import (
    BoundaryLimits,
    BracketFailure,
    NoSwitchSignal,
    build_obstacle,
    classify_boundary_limits,
    tangency,
    transform,
    _reward_scale_point,
)
from .model import SwitchingProblem
from .noswitch import ResolventDivergence, no_switch_value


class SolverError(ArithmeticError):
    """Base for failures of the threshold solver."""


class InfiniteValue(SolverError):
    """The reward grows too fast for the discount; both value functions
    are identically infinite."""


class NoSwitchEverywhere(SolverError):
    """Neither regime ever finds switching worthwhile; the value
    functions collapse to the no-switch values g0 and g1."""


class NonConvergence(SolverError):
    """The iteration exhausted its budget; carries a trace of the last
    beta1 iterates for diagnosis."""

    def __init__(self, message: str, trace: Sequence[float] = ()):
        super().__init__(message)
        self.trace = tuple(trace)


class OrderingViolation(SolverError):
    """The converged thresholds came out with a* >= b*, which breaks the
    two-threshold structure this solver assumes."""


@dataclass(frozen=True)
class Solution:
    """Converged thresholds, coefficients, and assembled value functions.

    w0_line and w1_line are (slope, anchor coordinate) pairs describing
    the value functions in transformed coordinates: the transformed idle
    value is slope * (y - anchor) along F0, the open one along G1.
    """

    a_star: float
    b_star: float
    beta0_star: float
    beta1_star: float
    limits: BoundaryLimits
    iterations: int
    residual: float
    v0: Callable[..., np.ndarray]
    v1: Callable[..., np.ndarray]
    w0_line: tuple[float, float]
    w1_line: tuple[float, float]
    problem: SwitchingProblem


_BETA1_TOL = 1e-10
_MAX_SWEEPS = 200


def _prepare(problem: SwitchingProblem):
    """Fundamentals, no-switch values, and boundary classification, with
    divergent rewards turned into InfiniteValue up front."""
    funds = (build_fundamentals(problem, 0), build_fundamentals(problem, 1))
    try:
        gs = (
            no_switch_value(problem, 0, funds[0]),
            no_switch_value(problem, 1, funds[1]),
        )
    except ResolventDivergence as exc:
        raise InfiniteValue(
            "the open-regime reward outruns the discount; the expected "
            "discounted reward diverges"
        ) from exc
    limits = classify_boundary_limits(problem, funds, gs)
    if limits.any_infinite:
        raise InfiniteValue(
            "a boundary limit of the obstacle diverges; both value "
            "functions are infinite"
        )
    return funds, gs, limits


def _initial_beta1(problem: SwitchingProblem, funds) -> float:
    """Scale-matched negative initial guess: the closing cost measured in
    units of the open regime's decreasing solution at a reference state."""
    x_ref = _reward_scale_point(problem)
    h_close = float(problem.switch_cost(0, x_ref))
    phi1 = float(funds[1].phi(x_ref))
    if h_close <= 0.0 or not math.isfinite(phi1) or phi1 <= 0.0:
        return -1.0
    return -h_close / phi1


def solve(
    problem: SwitchingProblem,
    *,
    beta1_init: Optional[float] = None,
    max_iterations: int = _MAX_SWEEPS,
    tol: float = _BETA1_TOL,
) -> Solution:
    """Iterate the two tangency maps to the joint fixed point.

    Given beta1, the idle-regime tangency produces (b, beta0); given that
    beta0, the open-regime tangency produces (a, beta1'). Convergence is
    declared on beta1 alone (relative tolerance ``tol``); both tangency
    residuals are re-checked on the final pass.
    """
    funds, gs, limits = _prepare(problem)
    beta1 = float(beta1_init) if beta1_init is not None else _initial_beta1(problem, funds)

    trace: list[float] = []
    sweeps = 0
    converged = False
    last_failure: Optional[BaseException] = None
    while sweeps < max_iterations:
        sweeps += 1
        trace.append(beta1)
        try:
            step0 = tangency(transform(build_obstacle(problem, funds, gs, 0, beta1)))
        except BracketFailure as exc:
            # the interim slope is out of the workable range; shrink the
            # open-value proxy toward the no-switch case and retry
            last_failure = exc
            beta1 *= 0.5
            continue

        beta0 = 0.0 if isinstance(step0, NoSwitchSignal) else step0.beta
        try:
            step1 = tangency(transform(build_obstacle(problem, funds, gs, 1, beta0)))
        except BracketFailure as exc:
            last_failure = exc
            beta1 *= 0.5
            continue

        if isinstance(step0, NoSwitchSignal) and isinstance(step1, NoSwitchSignal):
            raise NoSwitchEverywhere(
                "neither regime ever switches; v0 = g0 and v1 = g1"
            )
        raw = 0.0 if isinstance(step1, NoSwitchSignal) else step1.beta

        if abs(raw - beta1) <= tol * (1.0 + abs(raw)):
            beta1 = raw
            converged = True
            break
        # damp overshoots: a sign flip or an order-of-magnitude jump
        # halves the step
        if (raw > 0.0) or (abs(raw) > 10.0 * abs(beta1) > 0.0):
            beta1 = beta1 + 0.5 * (raw - beta1)
        else:
            beta1 = raw

    if not converged:
        message = f"no fixed point of the tangency maps after {sweeps} sweeps"
        if last_failure is not None:
            message += f" (last failure: {last_failure})"
        raise NonConvergence(message, trace=trace[-8:])

    return _final_assembly(problem, funds, gs, limits, beta1, sweeps)


def _final_assembly(problem, funds, gs, limits, beta1_star, sweeps) -> Solution:
    """One clean sweep at the converged beta1, then the Solution."""
    tr0 = transform(build_obstacle(problem, funds, gs, 0, beta1_star))
    step0 = tangency(tr0)
    if isinstance(step0, NoSwitchSignal):
        raise NonConvergence(
            "degenerate one-sided structure: the idle regime never opens "
            "at the converged beta1 while the open regime still closes",
            trace=(beta1_star,),
        )
    tr1 = transform(build_obstacle(problem, funds, gs, 1, step0.beta))
    step1 = tangency(tr1)
    if isinstance(step1, NoSwitchSignal):
        raise NonConvergence(
            "degenerate one-sided structure: the open regime never closes "
            "at the converged beta0 while the idle regime still opens",
            trace=(beta1_star,),
        )

    residual = max(
        abs(float(tr0.residual_T(step0.x_star))),
        abs(float(tr1.residual_T(step1.x_star))),
    )
    return _assemble(
        problem, funds, gs, limits,
        a_star=step1.x_star, b_star=step0.x_star,
        beta0_star=step0.beta, beta1_star=step1.beta,
        iterations=sweeps, residual=residual,
    )


def _assemble(problem, funds, gs, limits, *, a_star, b_star,
              beta0_star, beta1_star, iterations, residual) -> Solution:
    if not (a_star < b_star):
        raise OrderingViolation(
            f"thresholds out of order: a* = {a_star:.8g} >= b* = {b_star:.8g}"
        )
    both_natural = (problem.lower.kind == "natural"
                    and problem.upper.kind == "natural")
    if both_natural and not (beta0_star > 0.0 > beta1_star):
        raise NonConvergence(
            "converged to a structurally invalid point: expected "
            f"beta0 > 0 > beta1, got ({beta0_star:.6g}, {beta1_star:.6g})",
            trace=(beta1_star,),
        )

    y_anchor0 = funds[0].lower_F
    y_anchor1 = funds[1].upper_G
    v0, v1 = _value_evaluators(
        problem, funds, gs, a_star, b_star, beta0_star, beta1_star,
        y_anchor0, y_anchor1,
    )
    return Solution(
        a_star=float(a_star), b_star=float(b_star),
        beta0_star=float(beta0_star), beta1_star=float(beta1_star),
        limits=limits, iterations=int(iterations), residual=float(residual),
        v0=v0, v1=v1,
        w0_line=(float(beta0_star), float(y_anchor0)),
        w1_line=(float(beta1_star), float(y_anchor1)),
        problem=problem,
    )


def _value_evaluators(problem, funds, gs, a_star, b_star,
                      beta0, beta1, y_anchor0, y_anchor1):
    """Piecewise value functions from the converged lines.

    At the thresholds themselves the continuation-side branch is used.
    With natural boundaries the two branches agree there up to the
    tangency residual.  When the lower endpoint is absorbing the idle
    line is anchored at (F0(c), 0) while the open-regime obstacle
    credits the idle continuation as beta0 * psi0, so v1 carries a jump
    of beta0 * F0(c) * phi0(a*) at a*.  That anchored form is the one
    that matches the known threshold quadruples, so we keep it and
    document the seam rather than force continuity.
    """
    fund0, fund1 = funds
    g0, g1 = gs

    def v_hat0(x):
        x = np.asarray(x, dtype=float)
        return fund0.phi(x) * beta0 * (fund0.F(x) - y_anchor0) + g0.g(x)

    def v_hat1(x):
        x = np.asarray(x, dtype=float)
        return fund1.psi(x) * beta1 * (fund1.G(x) - y_anchor1) + g1.g(x)

    def v0(x):
        scalar = np.isscalar(x)
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.where(
            x <= b_star, v_hat0(x), v_hat1(x) - problem.switch_cost(1, x)
        )
        return float(out[0]) if scalar else out

    def v1(x):
        scalar = np.isscalar(x)
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.where(
            x >= a_star, v_hat1(x), v_hat0(x) - problem.switch_cost(0, x)
        )
        return float(out[0]) if scalar else out

    return v0, v1


def evaluate_value(solution: Solution, regime: int, x) -> float:
    """Value of holding `regime` at state x, domain-checked."""
    c, d = solution.problem.interval
    arr = np.asarray(x, dtype=float)
    if np.any(arr <= c) or np.any(arr >= d):
        raise OutOfDomain(f"state {x} outside the open interval ({c}, {d})")
    if regime == 0:
        return solution.v0(x)
    if regime == 1:
        return solution.v1(x)
    raise ValueError(f"regime must be 0 or 1, got {regime}")


# --------------------------------------------------------------------------
# Simultaneous Newton path
# --------------------------------------------------------------------------


def _tangency_system(problem, funds, gs):
    """Residuals of the pair of tangency equations with the betas
    eliminated.

    Both obstacles are affine in the other regime's coefficient, so at a
    candidate (a, b) the smooth-tangency conditions beta0 = m0(b) and
    beta1 = m1(a) form a linear 2x2 system.  The returned callable maps
    (a, b) to (residual0, residual1, beta0, beta1).
    """
    fund0, fund1 = funds
    g0, g1 = gs
    k0 = build_obstacle(problem, funds, gs, 0, 0.0)
    k1 = build_obstacle(problem, funds, gs, 1, 0.0)
    y_anchor0 = fund0.lower_F
    y_anchor1 = fund1.upper_G

    def coefficients(x, regime):
        if regime == 0:
            w = fund0.wronskian(x)
            A = (k0.dr(x) * fund0.phi(x) - k0.r(x) * fund0.dphi(x)) / w
            B = (fund1.dphi(x) * fund0.phi(x) - fund1.phi(x) * fund0.dphi(x)) / w
            return float(A), float(B)
        w = fund1.wronskian(x)
        A = (k1.dr(x) * fund1.psi(x) - k1.r(x) * fund1.dpsi(x)) / w
        B = (fund0.dpsi(x) * fund1.psi(x) - fund0.psi(x) * fund1.dpsi(x)) / w
        return float(A), float(B)

    def system(a, b):
        A0, B0 = coefficients(b, 0)   # m0(b) = A0 - beta1 * B0
        A1, B1 = coefficients(a, 1)   # m1(a) = A1 + beta0 * B1
        det = 1.0 + B0 * B1
        beta0 = (A0 - B0 * A1) / det
        beta1 = (A1 + B1 * A0) / det
        q0 = (float(k0.r(b)) - beta1 * float(fund1.phi(b))) / float(fund0.phi(b))
        q1 = (float(k1.r(a)) + beta0 * float(fund0.psi(a))) / float(fund1.psi(a))
        e0 = beta0 * (float(fund0.F(b)) - y_anchor0) - q0
        e1 = beta1 * (float(fund1.G(a)) - y_anchor1) - q1
        return e0, e1, beta0, beta1

    return system


def solve_simultaneous(
    problem: SwitchingProblem,
    *,
    a0: Optional[float] = None,
    b0: Optional[float] = None,
    max_iterations: int = 60,
) -> Solution:
    """Damped Newton on the two tangency equations in (a, b).

    An independent route to the quadruple: no alternation, the betas are
    eliminated through the slope formulas at each candidate pair.  The
    default starting pair comes from a single sweep of the alternating
    maps; explicit a0/b0 override it (an inverted pair is reordered).
    """
    funds, gs, limits = _prepare(problem)

    try:
        probe0 = tangency(transform(build_obstacle(problem, funds, gs, 0, 0.0)))
        degenerate = isinstance(probe0, NoSwitchSignal)
        if degenerate:
            probe1 = tangency(transform(build_obstacle(problem, funds, gs, 1, 0.0)))
            degenerate = isinstance(probe1, NoSwitchSignal)
    except BracketFailure:
        degenerate = False
    if degenerate:
        raise NoSwitchEverywhere(
            "neither regime ever switches; v0 = g0 and v1 = g1"
        )

    if a0 is None or b0 is None:
        a_init, b_init = _newton_seed(problem, funds, gs)
        a = a_init if a0 is None else float(a0)
        b = b_init if b0 is None else float(b0)
    else:
        a, b = float(a0), float(b0)
    if a > b:
        a, b = b, a
    if a == b:
        b = a * 1.5 + 1e-3

    system = _tangency_system(problem, funds, gs)
    e0, e1, beta0, beta1 = system(a, b)
    norm = math.hypot(e0, e1)
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        scale = 1.0 + abs(beta0 * (float(funds[0].F(b)) - funds[0].lower_F)) \
            + abs(beta1 * (float(funds[1].G(a)) - funds[1].upper_G))
        if norm <= 1e-12 * scale:
            break

        ha = 1e-6 * (1.0 + abs(a))
        hb = 1e-6 * (1.0 + abs(b))
        e0_ap, e1_ap, _, _ = system(a + ha, b)
        e0_am, e1_am, _, _ = system(a - ha, b)
        e0_bp, e1_bp, _, _ = system(a, b + hb)
        e0_bm, e1_bm, _, _ = system(a, b - hb)
        J = np.array([
            [(e0_ap - e0_am) / (2 * ha), (e0_bp - e0_bm) / (2 * hb)],
            [(e1_ap - e1_am) / (2 * ha), (e1_bp - e1_bm) / (2 * hb)],
        ])
        try:
            delta = np.linalg.solve(J, -np.array([e0, e1]))
        except np.linalg.LinAlgError as exc:
            raise NonConvergence(
                f"singular Jacobian at (a, b) = ({a:.8g}, {b:.8g})",
                trace=(beta1,),
            ) from exc

        step = 1.0
        accepted = False
        for _ in range(30):
            a_new = a + step * float(delta[0])
            b_new = b + step * float(delta[1])
            if a_new < b_new and _inside_window(problem, funds, a_new, b_new):
                try:
                    trial = system(a_new, b_new)
                except (ArithmeticError, OutOfDomain):
                    trial = None
                if trial is not None and all(map(math.isfinite, trial)):
                    t_norm = math.hypot(trial[0], trial[1])
                    if t_norm < norm or step < 1e-3:
                        a, b = a_new, b_new
                        e0, e1, beta0, beta1 = trial
                        norm = t_norm
                        accepted = True
                        break
            step *= 0.5
        if not accepted:
            raise NonConvergence(
                f"Newton step rejected at (a, b) = ({a:.8g}, {b:.8g}), "
                f"residual norm {norm:.3e}",
                trace=(beta1,),
            )
    else:
        raise NonConvergence(
            f"tangency system not solved after {max_iterations} Newton "
            f"iterations; residual norm {norm:.3e}",
            trace=(beta1,),
        )

    return _assemble(
        problem, funds, gs, limits,
        a_star=a, b_star=b, beta0_star=beta0, beta1_star=beta1,
        iterations=iterations, residual=max(abs(e0), abs(e1)),
    )


def _newton_seed(problem, funds, gs) -> tuple[float, float]:
    """One sweep of the alternating maps as a starting pair, with a
    reward-scale fallback when the sweep fails."""
    beta1 = _initial_beta1(problem, funds)
    for _ in range(60):
        try:
            step0 = tangency(transform(build_obstacle(problem, funds, gs, 0, beta1)))
        except BracketFailure:
            beta1 *= 0.5
            continue
        if isinstance(step0, NoSwitchSignal):
            break
        try:
            step1 = tangency(
                transform(build_obstacle(problem, funds, gs, 1, step0.beta))
            )
        except BracketFailure:
            beta1 *= 0.5
            continue
        if isinstance(step1, NoSwitchSignal):
            break
        return step1.x_star, step0.x_star
    x_ref = _reward_scale_point(problem)
    return 0.6 * x_ref, 2.5 * x_ref


def _inside_window(problem, funds, a, b) -> bool:
    c, d = problem.interval
    return a > c and (math.isinf(d) or b < d)


__all__ = [
    "InfiniteValue",
    "NoSwitchEverywhere",
    "NonConvergence",
    "OrderingViolation",
    "Solution",
    "SolverError",
    "evaluate_value",
    "solve",
    "solve_simultaneous",
]
