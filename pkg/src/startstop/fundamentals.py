"""Fundamental solutions psi (increasing) and phi (decreasing) of
(A - alpha) u = 0 per regime, and the coordinate transforms built from them.

F = psi/phi is strictly increasing, G = -phi/psi strictly increasing and
negative; both map the state interval to the coordinates in which the
switching value functions become linear on continuation regions.

Closed forms: GBM regimes get pure powers x^(p+-) with exponents from the
characteristic quadratic; OU regimes get Hermite functions of the scaled,
centered state.  Custom regimes are integrated numerically from both ends
of a bounded interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from . import specialfn
from .model import (
    CustomDiffusion,
    GeometricBM,
    OrnsteinUhlenbeck,
    ValidatedProblem,
)

__all__ = [
    "Fundamentals",
    "GBMExponents",
    "OUCylinder",
    "build_fundamentals",
    "transform_F",
    "transform_G",
    "inverse_F",
    "inverse_G",
    "FundamentalsError",
    "OutOfDomain",
    "UnsupportedRegime",
]


class FundamentalsError(ValueError):
    pass


class OutOfDomain(FundamentalsError):
    pass


class UnsupportedRegime(FundamentalsError):
    pass


@dataclass(frozen=True)
class GBMExponents:
    """Roots p+- of (vol^2/2) p (p-1) + drift p - discount = 0."""

    p_plus: float
    p_minus: float
    discriminant: float


@dataclass(frozen=True)
class OUCylinder:
    """Hermite-function parameters: degree nu = -discount/speed, the
    reversion level as center, and sqrt(speed)/vol as argument scale."""

    nu: float
    center: float
    scale: float


ClosedForm = Union[GBMExponents, OUCylinder, None]

# Hermite evaluations stay accurate well past |z| = 20; beyond ~25 the
# defining integral approaches the double-precision ceiling.
_OU_ARG_CAP = 25.0


@dataclass(frozen=True)
class Fundamentals:
    """Per-regime psi/phi with derivatives and the F/G transforms.

    All callables accept scalars or arrays.  ``lower_F`` and ``upper_G``
    are the exact limit values of F at the lower endpoint and G at the
    upper endpoint (0.0 at natural boundaries, evaluated at absorbing
    ones); they are the anchor coordinates used downstream.
    """

    regime: int
    psi: Callable
    phi: Callable
    dpsi: Callable
    dphi: Callable
    d2psi: Callable
    d2phi: Callable
    F: Callable
    G: Callable
    F_inv: Callable
    G_inv: Callable
    lower_F: float
    upper_G: float
    interval: tuple[float, float]
    closed_form: ClosedForm = None

    def wronskian(self, x):
        """psi' phi - psi phi', strictly positive."""
        return self.dpsi(x) * self.phi(x) - self.psi(x) * self.dphi(x)

    def dF(self, x):
        """F' = W / phi^2."""
        return self.wronskian(x) / np.square(self.phi(x))

    def dG(self, x):
        """G' = W / psi^2."""
        return self.wronskian(x) / np.square(self.psi(x))


def gbm_exponents(drift: float, vol: float, discount: float) -> GBMExponents:
    """Characteristic roots for (vol^2/2) x^2 u'' + drift x u' - discount u = 0."""
    half_v2 = 0.5 * vol * vol
    b = drift - half_v2
    disc = math.sqrt(b * b + 4.0 * half_v2 * discount)
    return GBMExponents(
        p_plus=(-b + disc) / (2.0 * half_v2),
        p_minus=(-b - disc) / (2.0 * half_v2),
        discriminant=disc,
    )


def _as_float_array(x):
    return np.asarray(x, dtype=float)


def _build_gbm(problem: ValidatedProblem, regime: int, fam: GeometricBM) -> Fundamentals:
    tag = gbm_exponents(fam.drift, fam.vol, problem.discount)
    pp, pm = tag.p_plus, tag.p_minus
    c, d = problem.interval
    span = pp - pm

    def psi(x):
        return _as_float_array(x) ** pp

    def phi(x):
        return _as_float_array(x) ** pm

    def dpsi(x):
        return pp * _as_float_array(x) ** (pp - 1.0)

    def dphi(x):
        return pm * _as_float_array(x) ** (pm - 1.0)

    def d2psi(x):
        return pp * (pp - 1.0) * _as_float_array(x) ** (pp - 2.0)

    def d2phi(x):
        return pm * (pm - 1.0) * _as_float_array(x) ** (pm - 2.0)

    def F(x):
        return _as_float_array(x) ** span

    def G(x):
        # x = 0 maps to -inf, the correct boundary limit
        with np.errstate(divide="ignore"):
            return -(_as_float_array(x) ** (-span))

    def F_inv(y):
        y = _as_float_array(y)
        if np.any(y <= 0):
            raise OutOfDomain("F of a GBM regime is positive on (0, inf)")
        return y ** (1.0 / span)

    def G_inv(y):
        y = _as_float_array(y)
        if np.any(y >= 0):
            raise OutOfDomain("G of a GBM regime is negative on (0, inf)")
        return (-y) ** (-1.0 / span)

    lower_F = float(c**span) if c > 0 else 0.0
    upper_G = 0.0 if math.isinf(d) else float(-(d ** (-span)))
    return Fundamentals(
        regime=regime, psi=psi, phi=phi, dpsi=dpsi, dphi=dphi,
        d2psi=d2psi, d2phi=d2phi, F=F, G=G, F_inv=F_inv, G_inv=G_inv,
        lower_F=lower_F, upper_G=upper_G, interval=(c, d), closed_form=tag,
    )


def _build_ou(problem: ValidatedProblem, regime: int, fam: OrnsteinUhlenbeck) -> Fundamentals:
    nu = -problem.discount / fam.reversion_speed
    scale = math.sqrt(fam.reversion_speed) / fam.vol
    center = fam.level
    tag = OUCylinder(nu=nu, center=center, scale=scale)
    c, d = problem.interval
    pref = 2.0 ** (-nu / 2.0)
    dpref = pref * 2.0 * nu * scale  # chain factor for derivatives

    def _z(x):
        return scale * (_as_float_array(x) - center)

    def psi(x):
        return pref * specialfn.hermite(nu, -_z(x))

    def phi(x):
        return pref * specialfn.hermite(nu, _z(x))

    def dpsi(x):
        return -dpref * specialfn.hermite(nu - 1.0, -_z(x))

    def dphi(x):
        return dpref * specialfn.hermite(nu - 1.0, _z(x))

    # (A - alpha) u = 0 gives u'' exactly in terms of u and u'
    def d2psi(x):
        x = _as_float_array(x)
        mu = fam.reversion_speed * (center - x)
        return 2.0 / (fam.vol ** 2) * (problem.discount * psi(x) - mu * dpsi(x))

    def d2phi(x):
        x = _as_float_array(x)
        mu = fam.reversion_speed * (center - x)
        return 2.0 / (fam.vol ** 2) * (problem.discount * phi(x) - mu * dphi(x))

    def F(x):
        return psi(x) / phi(x)

    def G(x):
        return -phi(x) / psi(x)

    z_cap = _OU_ARG_CAP / scale
    x_lo_safe = max(c, center - z_cap)
    x_hi_safe = center + z_cap if math.isinf(d) else min(d, center + z_cap)

    def F_inv(y):
        return _monotone_inverse(F, y, x_lo_safe, x_hi_safe, increasing=True)

    def G_inv(y):
        return _monotone_inverse(G, y, x_lo_safe, x_hi_safe, increasing=True)

    lower_F = 0.0 if math.isinf(c) else float(F(c))
    upper_G = 0.0 if math.isinf(d) else float(G(d))
    return Fundamentals(
        regime=regime, psi=psi, phi=phi, dpsi=dpsi, dphi=dphi,
        d2psi=d2psi, d2phi=d2phi, F=F, G=G, F_inv=F_inv, G_inv=G_inv,
        lower_F=lower_F, upper_G=upper_G, interval=(c, d), closed_form=tag,
    )


def _monotone_inverse(fn, y, x_lo: float, x_hi: float, increasing: bool):
    """Invert a scalar monotone function on [x_lo, x_hi] by bracketed root
    finding, elementwise over y."""
    y_arr = _as_float_array(y)
    scalar = y_arr.ndim == 0
    y_flat = np.atleast_1d(y_arr)
    f_lo = float(fn(x_lo))
    f_hi = float(fn(x_hi))
    lo_val, hi_val = (f_lo, f_hi) if increasing else (f_hi, f_lo)
    out = np.empty_like(y_flat)
    for i, yi in enumerate(y_flat):
        if not (lo_val <= yi <= hi_val):
            raise OutOfDomain(
                f"transform inverse: {yi} outside attainable range [{lo_val}, {hi_val}]"
            )
        out[i] = brentq(lambda x: float(fn(x)) - yi, x_lo, x_hi, xtol=1e-300, rtol=1e-15)
    return float(out[0]) if scalar else out.reshape(y_arr.shape)


def _build_custom(problem: ValidatedProblem, regime: int, fam: CustomDiffusion) -> Fundamentals:
    c, d = problem.interval
    if math.isinf(c) or math.isinf(d):
        raise UnsupportedRegime(
            "custom regimes need a bounded interval for the numeric fundamental pair"
        )
    alpha = problem.discount
    pad = 1e-9 * (d - c)
    lo, hi = c + pad, d - pad
    x_mid = 0.5 * (c + d)

    def rhs(x, u):
        mu = float(fam.drift_fn(x))
        sig = float(fam.vol_fn(x))
        return [u[1], 2.0 / (sig * sig) * (alpha * u[0] - mu * u[1])]

    # increasing solution: grow from the lower end; decreasing: from the
    # upper.  DOP853's dense output stays smooth enough for difference
    # quotients taken on the result.
    sol_psi = solve_ivp(rhs, (lo, hi), [pad, 1.0], dense_output=True,
                        rtol=1e-12, atol=1e-16, method="DOP853")
    sol_phi = solve_ivp(rhs, (hi, lo), [pad, -1.0], dense_output=True,
                        rtol=1e-12, atol=1e-16, method="DOP853")
    if not (sol_psi.success and sol_phi.success):
        raise UnsupportedRegime("numeric integration of the fundamental pair failed")

    psi_scale = 1.0 / sol_psi.sol(x_mid)[0]
    phi_scale = 1.0 / sol_phi.sol(x_mid)[0]

    def _eval(sol, scale_, row, x):
        x = _as_float_array(x)
        vals = sol.sol(np.clip(x.ravel(), lo, hi))[row] * scale_
        return vals.reshape(x.shape) if x.shape else float(vals[0])

    def psi(x):
        return _eval(sol_psi, psi_scale, 0, x)

    def dpsi(x):
        return _eval(sol_psi, psi_scale, 1, x)

    def phi(x):
        return _eval(sol_phi, phi_scale, 0, x)

    def dphi(x):
        return _eval(sol_phi, phi_scale, 1, x)

    def d2(x, u, du):
        x = _as_float_array(x)
        mu = fam.drift_at(x)
        sig = fam.vol_at(x)
        return 2.0 / (sig * sig) * (alpha * u - mu * du)

    def d2psi(x):
        return d2(x, psi(x), dpsi(x))

    def d2phi(x):
        return d2(x, phi(x), dphi(x))

    def F(x):
        return psi(x) / phi(x)

    def G(x):
        return -phi(x) / psi(x)

    def F_inv(y):
        return _monotone_inverse(F, y, lo, hi, increasing=True)

    def G_inv(y):
        return _monotone_inverse(G, y, lo, hi, increasing=True)

    return Fundamentals(
        regime=regime, psi=psi, phi=phi, dpsi=dpsi, dphi=dphi,
        d2psi=d2psi, d2phi=d2phi, F=F, G=G, F_inv=F_inv, G_inv=G_inv,
        lower_F=float(F(lo)), upper_G=float(G(hi)), interval=(c, d),
        closed_form=None,
    )


def build_fundamentals(problem: ValidatedProblem, regime: int) -> Fundamentals:
    """Fundamental pair and transforms for one regime of a validated problem."""
    fam = problem.regimes[regime].family
    if isinstance(fam, GeometricBM):
        return _build_gbm(problem, regime, fam)
    if isinstance(fam, OrnsteinUhlenbeck):
        return _build_ou(problem, regime, fam)
    if isinstance(fam, CustomDiffusion):
        return _build_custom(problem, regime, fam)
    raise UnsupportedRegime(f"unknown family {type(fam).__name__}")


# --------------------------------------------------------------------------
# Thin operation wrappers (the transform API used by callers that do not
# want to touch the Fundamentals object directly)
# --------------------------------------------------------------------------

def _check_interior(fund: Fundamentals, x):
    c, d = fund.interval
    x_arr = _as_float_array(x)
    if np.any(x_arr < c) or np.any(x_arr > d):
        raise OutOfDomain(f"state {x} outside [{c}, {d}]")


def transform_F(fund: Fundamentals, x):
    _check_interior(fund, x)
    return fund.F(x)


def transform_G(fund: Fundamentals, x):
    _check_interior(fund, x)
    return fund.G(x)


def inverse_F(fund: Fundamentals, y):
    return fund.F_inv(y)


def inverse_G(fund: Fundamentals, y):
    return fund.G_inv(y)
