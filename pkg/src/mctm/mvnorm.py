"""Deterministic multivariate-normal rectangle probabilities.

Bivariate probabilities use the arcsine-path integral

    P(X<=h, Y<=k; rho) = Phi(h)Phi(k)
        + (1/2pi) * int_0^{asin(rho)} exp(-(h^2 - 2hk sin t + k^2)
                                          / (2 cos^2 t)) dt

evaluated with fixed Gauss-Legendre panels (no randomness). Higher
dimensions use sequential conditioning along the Cholesky factor with a
scrambled Sobol sequence at a fixed seed; with 2^17 points the absolute
error is well below the documented 1e-4 tolerance for moderate J.
"""

import numpy as np
from scipy.special import ndtr, ndtri
from scipy.stats import qmc

_QMC_SEED = 13579
_QMC_POINTS = 1 << 17  # nearest power of two to the documented 1e5 points

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)
# two panels on [0, 1]: bulk plus a refined strip near the upper endpoint
_PANELS = ((0.0, 0.9), (0.9, 1.0))
_S_NODES = np.concatenate(
    [(a + b) / 2 + (b - a) / 2 * _GL_NODES for a, b in _PANELS]
)
_S_WEIGHTS = np.concatenate(
    [(b - a) / 2 * _GL_WEIGHTS for a, b in _PANELS]
)


def bvn_cdf(h, k, rho):
    """Standard bivariate normal CDF P(X <= h, Y <= k) with correlation rho.

    Broadcasts over array inputs; handles infinite limits and |rho| = 1.
    """
    h, k, rho = np.broadcast_arrays(
        np.asarray(h, dtype=np.float64),
        np.asarray(k, dtype=np.float64),
        np.asarray(rho, dtype=np.float64),
    )
    shape = h.shape
    h, k, rho = h.ravel(), k.ravel(), rho.ravel()
    out = np.empty(h.shape)

    neg_inf = np.isneginf(h) | np.isneginf(k)
    out[neg_inf] = 0.0
    h_inf = np.isposinf(h) & ~neg_inf
    out[h_inf] = ndtr(k[h_inf])
    k_inf = np.isposinf(k) & ~neg_inf & ~h_inf
    out[k_inf] = ndtr(h[k_inf])

    rest = ~(neg_inf | h_inf | k_inf)
    if np.any(rest):
        hr, kr, rr = h[rest], k[rest], np.clip(rho[rest], -1.0, 1.0)
        val = ndtr(hr) * ndtr(kr)
        interior = np.abs(rr) < 1.0
        if np.any(interior):
            hi, ki, ri = hr[interior], kr[interior], rr[interior]
            a = np.arcsin(ri)
            t = a[:, None] * _S_NODES[None, :]
            cos2 = np.cos(t) ** 2
            expo = -(hi[:, None] ** 2 - 2.0 * hi[:, None] * ki[:, None] * np.sin(t)
                     + ki[:, None] ** 2) / (2.0 * cos2)
            integral = a * np.exp(expo) @ _S_WEIGHTS
            val = val.copy()
            val[interior] += integral / (2.0 * np.pi)
        at_one = rr >= 1.0
        val[at_one] = ndtr(np.minimum(hr[at_one], kr[at_one]))
        at_neg_one = rr <= -1.0
        val[at_neg_one] = np.maximum(
            0.0, ndtr(hr[at_neg_one]) + ndtr(kr[at_neg_one]) - 1.0
        )
        out[rest] = np.clip(val, 0.0, 1.0)
    return out.reshape(shape) if shape else float(out[0])


def _corr_from_chol(chol):
    sd = np.sqrt(np.sum(chol * chol, axis=1))
    rho = (chol[1, 0] * chol[0, 0]) / (sd[0] * sd[1])
    return sd, rho


def mvn_cdf(upper, sigma=None, chol=None, n_points=_QMC_POINTS, seed=_QMC_SEED):
    """P(Z <= upper) for Z ~ N(0, sigma), deterministic for fixed seed.

    Either ``sigma`` or its lower Cholesky factor ``chol`` must be given.
    J = 1 and J = 2 use exact quadrature; J >= 3 uses sequential
    conditioning with a scrambled Sobol sequence.
    """
    upper = np.asarray(upper, dtype=np.float64)
    J = upper.size
    if chol is None:
        if sigma is None:
            raise ValueError("either sigma or chol is required")
        chol = np.linalg.cholesky(np.asarray(sigma, dtype=np.float64))
    if J == 1:
        return float(ndtr(upper[0] / chol[0, 0]))
    if J == 2:
        sd, rho = _corr_from_chol(chol)
        return float(bvn_cdf(upper[0] / sd[0], upper[1] / sd[1], rho))
    if np.any(np.isneginf(upper)):
        return 0.0
    m = max(10, int(np.ceil(np.log2(n_points))))
    u = qmc.Sobol(d=J - 1, scramble=True, seed=seed).random_base2(m)
    N = u.shape[0]
    prod = np.full(N, ndtr(upper[0] / chol[0, 0]))
    ys = np.empty((N, J - 1))
    e = prod.copy()
    for i in range(1, J):
        ys[:, i - 1] = ndtri(np.clip(u[:, i - 1] * e, 1e-300, 1.0 - 1e-16))
        num = upper[i] - ys[:, :i] @ chol[i, :i]
        e = ndtr(num / chol[i, i])
        prod *= e
    return float(np.clip(prod.mean(), 0.0, 1.0))
