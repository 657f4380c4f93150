"""Central finite differences, used where analytic derivatives do not apply."""

import numpy as np


def gradient(fun, theta, rel_step=1e-6):
    """Central-difference gradient with per-coordinate step rel_step*(1+|t|)."""
    theta = np.asarray(theta, dtype=np.float64)
    g = np.zeros(theta.size)
    for i in range(theta.size):
        h = rel_step * (1.0 + abs(theta[i]))
        up = theta.copy()
        dn = theta.copy()
        up[i] += h
        dn[i] -= h
        g[i] = (fun(up) - fun(dn)) / (2.0 * h)
    return g


def hessian(fun, theta, rel_step=1e-4):
    """Central-difference Hessian via gradients of gradients; symmetrized."""
    theta = np.asarray(theta, dtype=np.float64)
    d = theta.size
    H = np.zeros((d, d))
    for i in range(d):
        h = rel_step * (1.0 + abs(theta[i]))
        up = theta.copy()
        dn = theta.copy()
        up[i] += h
        dn[i] -= h
        H[i] = (gradient(fun, up, rel_step) - gradient(fun, dn, rel_step)) / (2.0 * h)
    return 0.5 * (H + H.T)
