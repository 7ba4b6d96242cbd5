"""Shared problem fixtures used across the test modules."""

import pytest

from startstop.model import Endpoint, gbm_problem, ou_problem


def make_gbm_profit():
    """GBM pair on (0, inf): idle drift 0.01, active drift 0, vol 0.25,
    discount 0.05, reward x - 0.4, both switch costs 2."""
    return gbm_problem(
        drift_closed=0.01,
        drift_open=0.0,
        vol=0.25,
        discount=0.05,
        reward_slope=1.0,
        reward_intercept=-0.4,
        cost_open=2.0,
        cost_close=2.0,
    )


def make_ou_harvest():
    """OU pair on (0, inf) with absorption at 0: speed 0.05, levels 5 and 1,
    vol 0.35, discount 0.105, reward x - 0.4, both switch costs 0.2."""
    return ou_problem(
        reversion_speed=0.05,
        level_closed=5.0,
        level_open=1.0,
        vol=0.35,
        discount=0.105,
        reward_slope=1.0,
        reward_intercept=-0.4,
        cost_open=0.2,
        cost_close=0.2,
        lower=Endpoint(0.0, "absorbing"),
    )


@pytest.fixture(scope="session")
def gbm_profit():
    return make_gbm_profit()


@pytest.fixture(scope="session")
def ou_harvest():
    return make_ou_harvest()
