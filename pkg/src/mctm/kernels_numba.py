"""Numba-accelerated hot kernels.

Same contracts as :mod:`mctm.kernels_numpy`. Compiled lazily on first use;
``cache=True`` persists compiled artifacts across processes.
"""

import numpy as np
from numba import njit


def binomial_coefficients(order):
    out = np.ones(order + 1)
    for m in range(1, order + 1):
        out[m] = out[m - 1] * (order - m + 1) / m
    return out


@njit(cache=True)
def bernstein_design(u, binom):
    n = u.shape[0]
    order = binom.shape[0] - 1
    out = np.empty((n, order + 1))
    for i in range(n):
        ui = u[i]
        vi = 1.0 - ui
        # powers accumulated left/right to avoid repeated pow calls
        up = 1.0
        for m in range(order + 1):
            out[i, m] = binom[m] * up
            up *= ui
        vp = 1.0
        for m in range(order, -1, -1):
            out[i, m] *= vp
            vp *= vi
    return out


@njit(cache=True)
def bernstein_deriv_design(u, binom_lower):
    lower = bernstein_design(u, binom_lower)
    n = u.shape[0]
    order = binom_lower.shape[0]  # = M
    out = np.zeros((n, order + 1))
    for i in range(n):
        for m in range(order):
            out[i, m + 1] += lower[i, m]
            out[i, m] -= lower[i, m]
        for m in range(order + 1):
            out[i, m] *= order
    return out


@njit(cache=True)
def _decasteljau(coef, u, work):
    order = coef.shape[0] - 1
    for m in range(order + 1):
        work[m] = coef[m]
    v = 1.0 - u
    for r in range(order):
        for m in range(order - r):
            work[m] = v * work[m] + u * work[m + 1]
    return work[0]


@njit(cache=True)
def _decasteljau_deriv(coef, u, work):
    order = coef.shape[0] - 1
    if order == 0:
        return 0.0
    for m in range(order):
        work[m] = coef[m + 1] - coef[m]
    v = 1.0 - u
    for r in range(order - 1):
        for m in range(order - 1 - r):
            work[m] = v * work[m] + u * work[m + 1]
    return order * work[0]


@njit(cache=True)
def invert_bernstein(coef, z, tol, newton_steps):
    n = z.shape[0]
    shared = coef.shape[0] == 1
    order = coef.shape[1] - 1
    u = np.empty(n)
    clamped = np.zeros(n, dtype=np.bool_)
    work = np.empty(order + 1)
    for i in range(n):
        c = coef[0] if shared else coef[i]
        zi = z[i]
        if zi <= c[0]:
            u[i] = 0.0
            clamped[i] = zi < c[0]
            continue
        if zi >= c[order]:
            u[i] = 1.0
            clamped[i] = zi > c[order]
            continue
        lo = 0.0
        hi = 1.0
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if _decasteljau(c, mid, work) < zi:
                lo = mid
            else:
                hi = mid
        ui = 0.5 * (lo + hi)
        for _ in range(newton_steps):
            f = _decasteljau(c, ui, work) - zi
            d = _decasteljau_deriv(c, ui, work)
            if d > 0.0:
                ui -= f / d
                if ui < 0.0:
                    ui = 0.0
                elif ui > 1.0:
                    ui = 1.0
        u[i] = ui
    return u, clamped
