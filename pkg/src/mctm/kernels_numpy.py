"""Pure-numpy implementations of the hot kernels.

Reference semantics for the numba backend in :mod:`mctm.kernels_numba`;
selected by setting ``MCTM_BACKEND=numpy``.
"""

import numpy as np


def binomial_coefficients(order):
    """C(order, m) for m = 0..order as float64."""
    out = np.ones(order + 1)
    for m in range(1, order + 1):
        out[m] = out[m - 1] * (order - m + 1) / m
    return out


def bernstein_design(u, binom):
    """Bernstein design matrix on the unit interval.

    Parameters
    ----------
    u : (n,) array in [0, 1]
    binom : (M+1,) binomial coefficients C(M, m)

    Returns
    -------
    (n, M+1) array with entries C(M,m) u^m (1-u)^(M-m).
    """
    order = binom.size - 1
    u = np.asarray(u, dtype=np.float64)
    m = np.arange(order + 1)
    return binom * u[:, None] ** m * (1.0 - u[:, None]) ** (order - m)


def bernstein_deriv_design(u, binom_lower):
    """Derivative (w.r.t. u) of the order-M Bernstein design matrix.

    ``binom_lower`` holds C(M-1, m); the derivative of the m-th basis
    polynomial is M * (b_{m-1,M-1}(u) - b_{m,M-1}(u)).
    """
    lower = bernstein_design(u, binom_lower)
    n = lower.shape[0]
    order = binom_lower.size  # = M
    out = np.zeros((n, order + 1))
    out[:, 1:] += lower
    out[:, :-1] -= lower
    return order * out


def _poly_values(coef, u, binom):
    design = bernstein_design(u, binom)
    if coef.shape[0] == 1:
        return design @ coef[0]
    return np.einsum("nm,nm->n", design, coef)


def _poly_derivs(coef, u, binom_lower):
    design = bernstein_deriv_design(u, binom_lower)
    if coef.shape[0] == 1:
        return design @ coef[0]
    return np.einsum("nm,nm->n", design, coef)


def invert_bernstein(coef, z, tol, newton_steps):
    """Invert increasing Bernstein polynomials on [0, 1] at targets ``z``.

    Parameters
    ----------
    coef : (n, M+1) or (1, M+1) coefficient rows (row 0 shared when single)
    z : (n,) targets
    tol : bisection bracket width before Newton refinement
    newton_steps : number of Newton polish iterations

    Returns
    -------
    (u, clamped) where targets outside [p(0), p(1)] clamp to the endpoint
    with ``clamped`` set.
    """
    coef = np.ascontiguousarray(coef, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    n = z.size
    order = coef.shape[1] - 1
    binom = binomial_coefficients(order)
    binom_lower = binomial_coefficients(order - 1) if order >= 1 else binom

    f0 = coef[:, 0] if coef.shape[0] > 1 else np.full(n, coef[0, 0])
    f1 = coef[:, -1] if coef.shape[0] > 1 else np.full(n, coef[0, -1])
    at_lo = z <= f0
    at_hi = (z >= f1) & ~at_lo
    clamped = (z < f0) | (z > f1)

    lo = np.zeros(n)
    hi = np.ones(n)
    n_iter = max(1, int(np.ceil(np.log2(1.0 / tol))))
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        go_right = _poly_values(coef, mid, binom) < z
        lo = np.where(go_right, mid, lo)
        hi = np.where(go_right, hi, mid)
    u = 0.5 * (lo + hi)
    for _ in range(newton_steps):
        f = _poly_values(coef, u, binom) - z
        d = _poly_derivs(coef, u, binom_lower)
        step = np.where(d > 0, f / np.where(d > 0, d, 1.0), 0.0)
        u = np.clip(u - step, 0.0, 1.0)
    u[at_lo] = 0.0
    u[at_hi] = 1.0
    return u, clamped
