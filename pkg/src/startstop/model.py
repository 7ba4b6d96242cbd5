"""Problem definitions for two-regime switching of one-dimensional diffusions.

A switching problem consists of two diffusion regimes on a common state
interval, a running reward earned while the "open" regime (index 1) is
active, costs for switching in either direction, and a discount rate.  The
solver maximizes the expected discounted reward net of switching costs over
all switching strategies.

Regime 0 is "closed" (no reward), regime 1 is "open".  Switching into
regime 1 pays ``cost_open``; switching into regime 0 pays ``cost_close``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

__all__ = [
    "GeometricBM",
    "OrnsteinUhlenbeck",
    "CustomDiffusion",
    "RegimeSpec",
    "AffineReward",
    "CustomReward",
    "ConstantCost",
    "CustomCost",
    "Endpoint",
    "SwitchingProblem",
    "ValidatedProblem",
    "ThresholdPolicy",
    "validate_problem",
    "ModelError",
    "NonPositiveVol",
    "NonPositiveCost",
    "BadInterval",
    "DiscountTooSmall",
]


class ModelError(ValueError):
    """Base class for problem-construction errors."""


class NonPositiveVol(ModelError):
    pass


class NonPositiveCost(ModelError):
    pass


class BadInterval(ModelError):
    pass


class DiscountTooSmall(ModelError):
    """Discount rate too small relative to the reward/drift growth."""


# --------------------------------------------------------------------------
# Diffusion families
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GeometricBM:
    """dX = drift*X dt + vol*X dW on (0, inf)."""

    drift: float
    vol: float

    def drift_at(self, x):
        return self.drift * np.asarray(x, dtype=float)

    def vol_at(self, x):
        return self.vol * np.asarray(x, dtype=float)


@dataclass(frozen=True)
class OrnsteinUhlenbeck:
    """dX = reversion_speed*(level - X) dt + vol dW."""

    reversion_speed: float
    level: float
    vol: float

    def drift_at(self, x):
        return self.reversion_speed * (self.level - np.asarray(x, dtype=float))

    def vol_at(self, x):
        return np.full_like(np.asarray(x, dtype=float), self.vol)


@dataclass(frozen=True)
class CustomDiffusion:
    """User-supplied drift and volatility functions of the state."""

    drift_fn: Callable[[float], float]
    vol_fn: Callable[[float], float]

    def drift_at(self, x):
        return np.vectorize(self.drift_fn, otypes=[float])(x)

    def vol_at(self, x):
        return np.vectorize(self.vol_fn, otypes=[float])(x)


Family = Union[GeometricBM, OrnsteinUhlenbeck, CustomDiffusion]


@dataclass(frozen=True)
class RegimeSpec:
    """One diffusion regime: its dynamics and its index.

    ``label`` is 0 for the closed regime and 1 for the open one.  The level
    of an Ornstein-Uhlenbeck open regime already includes any rent
    adjustment; the model layer does not distinguish how the level arose.
    """

    family: Family
    label: int

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ModelError(f"regime label must be 0 or 1, got {self.label}")

    def drift(self, x):
        return self.family.drift_at(x)

    def vol(self, x):
        return self.family.vol_at(x)


# --------------------------------------------------------------------------
# Rewards and costs
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class AffineReward:
    """f(x) = slope*x + intercept, the form with closed-form resolvents."""

    slope: float
    intercept: float

    def __call__(self, x):
        return self.slope * np.asarray(x, dtype=float) + self.intercept


@dataclass(frozen=True)
class CustomReward:
    fn: Callable[[float], float]

    def __call__(self, x):
        return np.vectorize(self.fn, otypes=[float])(x)


Reward = Union[AffineReward, CustomReward]


@dataclass(frozen=True)
class ConstantCost:
    value: float

    def __call__(self, x):
        return np.full_like(np.asarray(x, dtype=float), self.value)


@dataclass(frozen=True)
class CustomCost:
    fn: Callable[[float], float]

    def __call__(self, x):
        return np.vectorize(self.fn, otypes=[float])(x)


Cost = Union[ConstantCost, CustomCost]


def _as_cost(c) -> Cost:
    if isinstance(c, (ConstantCost, CustomCost)):
        return c
    if isinstance(c, (int, float)):
        return ConstantCost(float(c))
    if callable(c):
        return CustomCost(c)
    raise ModelError(f"cannot interpret {c!r} as a switching cost")


# --------------------------------------------------------------------------
# The problem
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Endpoint:
    """One end of the state interval."""

    position: float
    kind: str  # "natural" | "absorbing"

    def __post_init__(self):
        if self.kind not in ("natural", "absorbing"):
            raise BadInterval(f"endpoint kind must be natural or absorbing, got {self.kind!r}")


@dataclass(frozen=True)
class SwitchingProblem:
    """Two regimes, a running reward in the open regime, switching costs,
    a discount rate, and the state interval.

    ``cost_open`` is H(x, 1), paid when switching into regime 1;
    ``cost_close`` is H(x, 0), paid when switching into regime 0.
    """

    regimes: tuple[RegimeSpec, RegimeSpec]
    running_reward: Reward
    cost_open: Cost
    cost_close: Cost
    discount: float
    lower: Endpoint
    upper: Endpoint

    @property
    def interval(self) -> tuple[float, float]:
        return (self.lower.position, self.upper.position)

    def regime(self, i: int) -> RegimeSpec:
        return self.regimes[i]

    def reward(self, i: int, x):
        """Running reward while regime i is active (zero when closed)."""
        if i == 1:
            return self.running_reward(x)
        return np.zeros_like(np.asarray(x, dtype=float))

    def switch_cost(self, into: int, x):
        """H(x, into): cost of switching into the given regime at state x."""
        return (self.cost_open if into == 1 else self.cost_close)(x)


@dataclass(frozen=True)
class ValidatedProblem(SwitchingProblem):
    """A SwitchingProblem that has passed validate_problem.

    ``closed_form_reward`` is set when the (family, reward) pair admits a
    closed-form no-switch value (affine reward under GBM or OU dynamics).
    """

    closed_form_reward: bool = field(default=False)


@dataclass(frozen=True)
class ThresholdPolicy:
    """Switch open->closed at or below a; closed->open at or above b."""

    a: float
    b: float

    def check(self, interval: tuple[float, float]):
        c, d = interval
        if not (c < self.a < self.b < d):
            raise BadInterval(
                f"thresholds must satisfy {c} < a < b < {d}, got a={self.a}, b={self.b}"
            )


_INTERIOR_PROBE_COUNT = 7


def _interior_points(c: float, d: float) -> np.ndarray:
    """A few strictly interior states for pointwise validation."""
    if math.isinf(d):
        lo = c + 1.0 if not math.isinf(c) else -3.0
        return lo + np.geomspace(0.01, 100.0, _INTERIOR_PROBE_COUNT)
    if math.isinf(c):
        return d - np.geomspace(100.0, 0.01, _INTERIOR_PROBE_COUNT)
    return c + (d - c) * np.linspace(0.05, 0.95, _INTERIOR_PROBE_COUNT)


def validate_problem(problem: SwitchingProblem) -> ValidatedProblem:
    """Check the standing assumptions and return an immutable validated copy.

    Idempotent: validating a ValidatedProblem returns it unchanged.

    Raises NonPositiveVol, NonPositiveCost, BadInterval, or
    DiscountTooSmall, naming the offending field.
    """
    if isinstance(problem, ValidatedProblem):
        return problem

    c, d = problem.interval
    if not c < d:
        raise BadInterval(f"interval: need c < d, got c={c}, d={d}")

    if problem.discount <= 0:
        raise DiscountTooSmall(f"discount: must be positive, got {problem.discount}")

    if problem.regimes[0].label != 0 or problem.regimes[1].label != 1:
        raise ModelError("regimes: must be ordered (closed, open) with labels (0, 1)")

    xs = _interior_points(c, d)
    for spec in problem.regimes:
        vols = np.asarray(spec.vol(xs), dtype=float)
        if not np.all(vols > 0):
            raise NonPositiveVol(
                f"vol: regime {spec.label} volatility must be positive on the interval"
            )
        if isinstance(spec.family, GeometricBM):
            if c < 0:
                raise BadInterval("interval: GBM regimes live on (0, inf), got c < 0")
            if problem.discount <= spec.family.drift:
                raise DiscountTooSmall(
                    f"discount: regime {spec.label} GBM drift {spec.family.drift} "
                    f"requires discount > drift, got {problem.discount}"
                )

    for name, cost in (("cost_open", problem.cost_open), ("cost_close", problem.cost_close)):
        vals = np.asarray(cost(xs), dtype=float)
        if not np.all(vals > 0):
            raise NonPositiveCost(f"{name}: switching costs must be strictly positive")

    closed_form = isinstance(problem.running_reward, AffineReward) and all(
        isinstance(s.family, (GeometricBM, OrnsteinUhlenbeck)) for s in problem.regimes
    )
    # Affine reward under GBM needs discount > drift + slope growth; the
    # regime-1 resolvent x/(discount - drift) blows up otherwise.  The GBM
    # check above already enforces discount > drift, which is exactly the
    # divergence boundary for an affine reward.
    return ValidatedProblem(
        regimes=problem.regimes,
        running_reward=problem.running_reward,
        cost_open=_as_cost(problem.cost_open),
        cost_close=_as_cost(problem.cost_close),
        discount=problem.discount,
        lower=problem.lower,
        upper=problem.upper,
        closed_form_reward=closed_form,
    )


# --------------------------------------------------------------------------
# Convenience constructors for the two bundled model shapes
# --------------------------------------------------------------------------

def gbm_problem(
    drift_closed: float,
    drift_open: float,
    vol: float,
    discount: float,
    reward_slope: float,
    reward_intercept: float,
    cost_open: float,
    cost_close: float,
) -> ValidatedProblem:
    """GBM in both regimes on (0, inf), natural ends, affine reward."""
    return validate_problem(
        SwitchingProblem(
            regimes=(
                RegimeSpec(GeometricBM(drift_closed, vol), 0),
                RegimeSpec(GeometricBM(drift_open, vol), 1),
            ),
            running_reward=AffineReward(reward_slope, reward_intercept),
            cost_open=ConstantCost(cost_open),
            cost_close=ConstantCost(cost_close),
            discount=discount,
            lower=Endpoint(0.0, "natural"),
            upper=Endpoint(math.inf, "natural"),
        )
    )


def ou_problem(
    reversion_speed: float,
    level_closed: float,
    level_open: float,
    vol: float,
    discount: float,
    reward_slope: float,
    reward_intercept: float,
    cost_open: float,
    cost_close: float,
    lower: Endpoint | None = None,
    upper: Endpoint | None = None,
) -> ValidatedProblem:
    """OU in both regimes, affine reward.  Defaults to the whole line."""
    return validate_problem(
        SwitchingProblem(
            regimes=(
                RegimeSpec(OrnsteinUhlenbeck(reversion_speed, level_closed, vol), 0),
                RegimeSpec(OrnsteinUhlenbeck(reversion_speed, level_open, vol), 1),
            ),
            running_reward=AffineReward(reward_slope, reward_intercept),
            cost_open=ConstantCost(cost_open),
            cost_close=ConstantCost(cost_close),
            discount=discount,
            lower=lower if lower is not None else Endpoint(-math.inf, "natural"),
            upper=upper if upper is not None else Endpoint(math.inf, "natural"),
        )
    )
