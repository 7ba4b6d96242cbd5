"""Compiled path-walking kernel for the Monte Carlo oracle.

The wrapper in :mod:`startstop.oracle.mc` precomputes, for every block
size 2^k * dt, the exact-transition coefficients, the discounted
expected running reward of one block, and the per-block discount
factor.  The kernel then advances each path with table lookups and one
normal draw per block: no transcendentals in the hot loop except the
occasional exp when a geometric path (tracked in log space) needs its
natural value for the reward term.

Blocks grow geometrically while the state is far from every trigger
(switching thresholds, absorbing endpoints) and shrink back to single
dt steps near them, so crossing detection keeps the dt resolution where
it matters.  A block of length tau is taken only when the trigger is at
least seven conditional standard deviations plus the worst-case mean
displacement away, which bounds the chance of an undetected excursion
across a trigger by roughly the Gaussian tail at seven sigma per block.

Randomness: xoshiro256++ streams seeded per path through splitmix64,
normals via a 256-layer Marsaglia-Tsang ziggurat with a 53-bit payload.
Identical arguments reproduce identical paths bit for bit, and distinct
path indices get decorrelated streams, which is what makes common
random numbers across policy variants work.
"""

from __future__ import annotations

import numpy as np
from numba import njit

__all__ = ["run_paths", "draw_normals"]


def _ziggurat_tables(n: int = 256):
    # Marsaglia-Tsang zigset recursion, 53-bit payload
    dn = 3.6541528853610088
    vn = 4.92867323399e-3
    m1 = float(1 << 53)
    kn = np.zeros(n, dtype=np.uint64)
    wn = np.zeros(n)
    fn = np.zeros(n)
    q = vn / np.exp(-0.5 * dn * dn)
    kn[0] = np.uint64((dn / q) * m1)
    kn[1] = 0
    wn[0] = q / m1
    wn[n - 1] = dn / m1
    fn[0] = 1.0
    fn[n - 1] = np.exp(-0.5 * dn * dn)
    tn = dn
    for i in range(n - 2, 0, -1):
        dn = np.sqrt(-2.0 * np.log(vn / dn + np.exp(-0.5 * dn * dn)))
        kn[i + 1] = np.uint64((dn / tn) * m1)
        tn = dn
        fn[i] = np.exp(-0.5 * dn * dn)
        wn[i] = dn / m1
    return kn, wn, fn


_KN, _WN, _FN = _ziggurat_tables()
_R_TAIL = 3.6541528853610088
_INV_R = 1.0 / _R_TAIL
_U53 = 1.1102230246251565e-16  # 2^-53
_MASK = 0xFFFFFFFFFFFFFFFF


@njit(inline="always")
def _rotl(x, k):
    return ((x << k) | (x >> (64 - k))) & _MASK


@njit(inline="always")
def _xo(s0, s1, s2, s3):
    res = (_rotl((s0 + s3) & _MASK, 23) + s0) & _MASK
    t = (s1 << 17) & _MASK
    s2 ^= s0
    s3 ^= s1
    s1 ^= s2
    s0 ^= s3
    s2 ^= t
    s3 = _rotl(s3, 45)
    return res, s0, s1, s2, s3


@njit(inline="always")
def _normal(s0, s1, s2, s3):
    while True:
        u, s0, s1, s2, s3 = _xo(s0, s1, s2, s3)
        i = u & 0xFF
        j = u >> 11
        sign = -1.0 if (u >> 8) & 1 else 1.0
        x = j * _WN[i]
        if j < _KN[i]:
            return sign * x, s0, s1, s2, s3
        if i == 0:
            while True:
                u1, s0, s1, s2, s3 = _xo(s0, s1, s2, s3)
                u2, s0, s1, s2, s3 = _xo(s0, s1, s2, s3)
                xx = -np.log((u1 >> 11) * _U53 + 5e-324) * _INV_R
                yy = -np.log((u2 >> 11) * _U53 + 5e-324)
                if yy + yy > xx * xx:
                    return sign * (_R_TAIL + xx), s0, s1, s2, s3
        else:
            u3, s0, s1, s2, s3 = _xo(s0, s1, s2, s3)
            if _FN[i] + ((u3 >> 11) * _U53) * (_FN[i - 1] - _FN[i]) < np.exp(-0.5 * x * x):
                return sign * x, s0, s1, s2, s3


@njit(inline="always")
def _seed4(seed, p):
    st = (np.uint64(seed) + np.uint64(p) * np.uint64(0x9E3779B97F4A7C15)) & _MASK
    s = np.empty(4, dtype=np.uint64)
    for k in range(4):
        st = (st + 0x9E3779B97F4A7C15) & _MASK
        z = st
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        s[k] = z ^ (z >> 31)
    return s[0], s[1], s[2], s[3]


@njit(cache=True)
def draw_normals(n, seed):
    """Raw standard normals from one stream (distribution tests)."""
    out = np.empty(n)
    s0, s1, s2, s3 = _seed4(seed, 0)
    for i in range(n):
        out[i], s0, s1, s2, s3 = _normal(s0, s1, s2, s3)
    return out


@njit(cache=True)
def run_paths(
    n_paths,
    seed,
    x0_rep,
    regime0,
    max_steps,
    kmax,
    disc_cutoff,
    fam,        # (2,) 0 = geometric (log-space state), 1 = mean-reverting
    level,      # (2,) reversion level, unused for geometric regimes
    thr_a,      # (2,) close-below threshold in each regime's representation
    thr_b,      # (2,) open-above threshold, same convention
    thr_lo,     # (2,) lower endpoint per representation
    thr_hi,     # (2,) upper endpoint per representation
    lower_absorbing,
    upper_absorbing,
    absorb_lo,  # (2,) value collected when stuck at the lower endpoint
    absorb_hi,  # (2,)
    step_a,     # (2, K) drift term (geometric) or shrink factor e^{-delta tau}
    step_sd,    # (2, K) conditional standard deviation over the block
    dreq,       # (2, K) state-independent part of the block admission bound
    gapshrink,  # (2, K) 1 - e^{-delta tau}; scales |x - level| in the bound
    rx,         # (2, K) reward-per-block coefficient on the natural state
    rc,         # (2, K) reward-per-block constant part
    discf,      # (K,) per-block discount factor
    cost_close,
    cost_open,
    g_a,        # (2,) closure tail: value ~ g_a + g_b * x at truncation
    g_b,
    out_vals,
    out_sw,
    out_abs,
):
    one = np.int64(1)
    for p in range(n_paths):
        s0, s1, s2, s3 = _seed4(seed, p)
        s = x0_rep
        reg = regime0
        t = np.int64(0)
        disc = 1.0
        val = 0.0
        nsw = 0
        absorbed = 0
        k = 0
        while True:
            if disc < disc_cutoff or t >= max_steps:
                xn = np.exp(s) if fam[reg] == 0 else s
                val += disc * (g_a[reg] + g_b[reg] * xn)
                break
            # distance to the nearest trigger for the active regime
            if reg == 1:
                d_dn = s - thr_a[1]
                d_up = (thr_hi[1] - s) if upper_absorbing else 1e300
            else:
                d_up = thr_b[0] - s
                d_dn = (s - thr_lo[0]) if lower_absorbing else 1e300
            d = d_dn if d_dn < d_up else d_up
            if d < 0.0:
                d = 0.0
            # largest admissible block: grow one notch, shrink while unsafe
            if k < kmax:
                k += 1
            while k > 0:
                if fam[reg] == 0:
                    need = dreq[reg, k]
                else:
                    gap = s - level[reg]
                    if gap < 0.0:
                        gap = -gap
                    need = dreq[reg, k] + gap * gapshrink[reg, k]
                if need <= d and t + (one << k) <= max_steps:
                    break
                k -= 1
            # discounted expected reward over the block (open regime only)
            if reg == 1:
                xn = np.exp(s) if fam[1] == 0 else s
                val += disc * (rx[1, k] * xn + rc[1, k])
            z, s0, s1, s2, s3 = _normal(s0, s1, s2, s3)
            if fam[reg] == 0:
                s = s + step_a[reg, k] + step_sd[reg, k] * z
            else:
                s = level[reg] + (s - level[reg]) * step_a[reg, k] + step_sd[reg, k] * z
            t += one << k
            disc *= discf[k]
            # threshold actions first, then absorption in the new regime
            if reg == 1:
                if s <= thr_a[1]:
                    val -= disc * cost_close
                    if fam[1] != fam[0]:
                        s = np.log(s) if fam[0] == 0 else np.exp(s)
                    reg = 0
                    nsw += 1
            else:
                if s >= thr_b[0]:
                    val -= disc * cost_open
                    if fam[0] != fam[1]:
                        s = np.log(s) if fam[1] == 0 else np.exp(s)
                    reg = 1
                    nsw += 1
            if lower_absorbing and s <= thr_lo[reg]:
                val += disc * absorb_lo[reg]
                absorbed = 1
                break
            if upper_absorbing and s >= thr_hi[reg]:
                val += disc * absorb_hi[reg]
                absorbed = 1
                break
        out_vals[p] = val
        out_sw[p] = nsw
        out_abs[p] = absorbed
