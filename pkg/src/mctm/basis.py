"""Bernstein polynomial bases, covariate bases and composed conditional bases.

Marginal transformations are linear combinations of Bernstein basis
polynomials b_{m,M}(u) = C(M,m) u^m (1-u)^(M-m) over a finite support
interval. The unnormalised polynomial form is used; the equivalent
beta-density basis is (M+1) * b_{m,M}, a constant factor absorbed into the
coefficients so that coefficient values stay on the scale of the transform
itself. A coefficient vector with strictly increasing entries yields a
strictly increasing transform; the sufficient linear constraint is exposed
by :func:`monotonicity_constraints`.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import backend
from .exceptions import ConfigurationError, InversionError

BISECT_TOL = 1e-10
NEWTON_STEPS = 5


@dataclass(frozen=True)
class Support:
    """Finite interval [lo, hi] a response margin lives on."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)):
            raise ConfigurationError(f"support bounds must be finite, got {self}")
        if not self.lo < self.hi:
            raise ConfigurationError(f"support requires lo < hi, got {self}")

    @property
    def width(self):
        return self.hi - self.lo

    def to_unit(self, y):
        """Map to the unit interval, clipping outside values.

        Returns (u, inside) where ``inside`` marks values within [lo, hi].
        """
        y = np.asarray(y, dtype=np.float64)
        u = (y - self.lo) / self.width
        inside = (u >= 0.0) & (u <= 1.0)
        return np.clip(u, 0.0, 1.0), inside

    @classmethod
    def from_data(cls, y, margin=0.0):
        """Observed range of ``y``, optionally widened by a relative margin."""
        y = np.asarray(y, dtype=np.float64)
        lo, hi = float(np.min(y)), float(np.max(y))
        pad = margin * (hi - lo)
        return cls(lo - pad, hi + pad)


@dataclass(frozen=True)
class BernsteinBasis:
    """Bernstein basis of a given order on a support interval."""

    order: int
    support: Support

    def __post_init__(self):
        if self.order < 1:
            raise ConfigurationError(f"order must be >= 1, got {self.order}")

    @property
    def dim(self):
        return self.order + 1

    @cached_property
    def _binom(self):
        return backend.binomial_coefficients(self.order)

    @cached_property
    def _binom_lower(self):
        return backend.binomial_coefficients(self.order - 1)

    def design(self, y):
        """(n, M+1) basis values; out-of-support arguments are clipped."""
        u, _ = self.support.to_unit(np.atleast_1d(y))
        return backend.bernstein_design(u, self._binom)

    def deriv_design(self, y):
        """(n, M+1) derivative values in response units.

        Includes the 1/width chain-rule factor; rows strictly outside the
        support are zero (the clipped evaluation is constant there).
        """
        u, inside = self.support.to_unit(np.atleast_1d(y))
        out = backend.bernstein_deriv_design(u, self._binom_lower) / self.support.width
        out[~inside] = 0.0
        return out

    def eval(self, y):
        return self.design([y])[0]

    def deriv(self, y):
        return self.deriv_design([y])[0]


@dataclass(frozen=True)
class CovariateBasis:
    """Basis in the covariates, used for the dependence coefficients.

    kinds
    -----
    ``intercept``  constant coefficient, dimension 1
    ``linear``     (1, x_1, ..., x_p), dimension 1 + n_covariates
    ``bernstein``  Bernstein basis in a single covariate
    """

    kind: str
    n_covariates: int = 0
    order: int = 0
    support: Support | None = None

    def __post_init__(self):
        if self.kind not in {"intercept", "linear", "bernstein"}:
            raise ConfigurationError(f"unknown covariate basis kind {self.kind!r}")
        if self.kind == "linear" and self.n_covariates < 1:
            raise ConfigurationError("linear covariate basis needs n_covariates >= 1")
        if self.kind == "bernstein":
            if self.n_covariates != 1:
                raise ConfigurationError("bernstein covariate basis is univariate")
            if self.support is None:
                raise ConfigurationError("bernstein covariate basis needs a support")
            if self.order < 1:
                raise ConfigurationError("bernstein covariate basis needs order >= 1")

    @property
    def dim(self):
        if self.kind == "intercept":
            return 1
        if self.kind == "linear":
            return 1 + self.n_covariates
        return self.order + 1

    def design(self, X):
        """(n, dim) design rows for covariate rows ``X`` of shape (n, p)."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        n = X.shape[0]
        if self.kind == "intercept":
            return np.ones((n, 1))
        if self.kind == "linear":
            if X.shape[1] != self.n_covariates:
                raise ConfigurationError(
                    f"expected {self.n_covariates} covariates, got {X.shape[1]}"
                )
            return np.hstack([np.ones((n, 1)), X])
        if X.shape[1] != 1:
            raise ConfigurationError("bernstein covariate basis expects one covariate")
        return BernsteinBasis(self.order, self.support).design(X[:, 0])


@dataclass(frozen=True)
class ConditionalBasis:
    """Joint basis c(y, x) of a marginal transformation.

    kinds
    -----
    ``unconditional``     c(y, x) = a(y)
    ``shift``             c(y, x) = (a(y), -x); coefficients (theta_1, beta)
                          give the transform a(y)'theta_1 - x'beta
    ``response-varying``  c(y, x) = (a(y), -a(y) x_1, ..., -a(y) x_p), i.e.
                          a full interaction a(y)'theta_1 - sum_t x_t a(y)'beta_t

    The covariate blocks carry a negative sign so that the coefficient
    vector stores the shift/interaction effects directly. Only the leading
    a(y) block (``monotone_dim`` entries) is subject to the monotonicity
    constraint; at fixed x every kind collapses to a single Bernstein
    polynomial whose coefficients are returned by
    :meth:`effective_coefficients`.
    """

    kind: str
    y_basis: BernsteinBasis
    n_covariates: int = 0

    def __post_init__(self):
        if self.kind not in {"unconditional", "shift", "response-varying"}:
            raise ConfigurationError(f"unknown conditional basis kind {self.kind!r}")
        if self.kind != "unconditional" and self.n_covariates < 1:
            raise ConfigurationError(f"{self.kind} basis needs n_covariates >= 1")

    @property
    def support(self):
        return self.y_basis.support

    @property
    def monotone_dim(self):
        return self.y_basis.dim

    @property
    def dim(self):
        m = self.y_basis.dim
        if self.kind == "unconditional":
            return m
        if self.kind == "shift":
            return m + self.n_covariates
        return m * (1 + self.n_covariates)

    def _check_x(self, X):
        if self.kind == "unconditional":
            return None
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_covariates:
            raise ConfigurationError(
                f"expected {self.n_covariates} covariates, got {X.shape[1]}"
            )
        return X

    def design(self, y, X=None):
        """Stacked basis and its y-derivative, both (n, dim)."""
        y = np.atleast_1d(y)
        A = self.y_basis.design(y)
        Ady = self.y_basis.deriv_design(y)
        if self.kind == "unconditional":
            return A, Ady
        X = self._check_x(X)
        if X.shape[0] not in (1, y.shape[0]):
            raise ConfigurationError("y and covariate row counts disagree")
        if X.shape[0] == 1 and y.shape[0] > 1:
            X = np.broadcast_to(X, (y.shape[0], X.shape[1]))
        if self.kind == "shift":
            C = np.hstack([A, -X])
            Cdy = np.hstack([Ady, np.zeros_like(X)])
            return C, Cdy
        blocks = [A] + [-A * X[:, t][:, None] for t in range(self.n_covariates)]
        dblocks = [Ady] + [-Ady * X[:, t][:, None] for t in range(self.n_covariates)]
        return np.hstack(blocks), np.hstack(dblocks)

    def eval(self, y, x=None):
        """Basis vector and its y-partial at a single (y, x)."""
        C, Cdy = self.design([y], None if x is None else np.atleast_2d(x))
        return C[0], Cdy[0]

    def effective_coefficients(self, theta, X=None):
        """Bernstein coefficients of y -> c(y, x)'theta at each covariate row.

        Returns an (n, M+1) array, or (1, M+1) when the transform does not
        depend on x (shared row).
        """
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.dim,):
            raise ConfigurationError(
                f"coefficient vector has length {theta.size}, basis dim is {self.dim}"
            )
        m = self.y_basis.dim
        if self.kind == "unconditional":
            return theta[None, :]
        X = self._check_x(X)
        if self.kind == "shift":
            # constant offset -x'beta is a uniform shift of all coefficients
            offset = X @ theta[m:]
            return theta[:m][None, :] - offset[:, None]
        beta = theta[m:].reshape(self.n_covariates, m)
        return theta[:m][None, :] - X @ beta


def monotonicity_constraints(order):
    """First-difference matrix D of shape (M, M+1).

    D @ theta > 0 holds iff the coefficient vector is strictly increasing,
    which makes the Bernstein transform strictly increasing on the open
    support.
    """
    if order < 1:
        raise ConfigurationError(f"order must be >= 1, got {order}")
    D = np.zeros((order, order + 1))
    idx = np.arange(order)
    D[idx, idx] = -1.0
    D[idx, idx + 1] = 1.0
    return D


def _endpoint_slopes(coef):
    """Derivative of the Bernstein polynomial at u = 0 and u = 1, rowwise."""
    order = coef.shape[1] - 1
    left = order * (coef[:, 1] - coef[:, 0])
    right = order * (coef[:, -1] - coef[:, -2])
    return left, right


def invert_monotone_batch(cb, theta, X, z):
    """Invert y -> c(y, x)'theta at targets ``z`` for covariate rows ``X``.

    Returns (y, clamped, monotone) where ``clamped`` marks targets beyond
    the transform range (mapped to the support endpoint) and ``monotone``
    marks rows whose transform passed the bracketing-derivative check.
    """
    z = np.atleast_1d(np.asarray(z, dtype=np.float64))
    coef = cb.effective_coefficients(theta, X)
    if coef.shape[0] not in (1, z.shape[0]):
        raise ConfigurationError("target and covariate row counts disagree")
    left, right = _endpoint_slopes(coef)
    monotone = (left > 0) & (right > 0) & (coef[:, -1] > coef[:, 0])
    if coef.shape[0] == 1:
        monotone = np.repeat(monotone, z.shape[0])
    u, clamped = backend.invert_bernstein(coef, z, BISECT_TOL, NEWTON_STEPS)
    sup = cb.support
    return sup.lo + u * sup.width, clamped, monotone


def invert_monotone(cb, theta, x, z):
    """Solve c(y, x)'theta = z for y on the support.

    Returns (y, clamped). Raises :class:`InversionError` when the transform
    fails the derivative-positivity check at the bracketing points.
    """
    X = None if x is None else np.atleast_2d(x)
    y, clamped, monotone = invert_monotone_batch(cb, theta, X, [z])
    if not monotone[0]:
        raise InversionError(
            "transform is not monotone increasing at the requested covariates"
        )
    return float(y[0]), bool(clamped[0])
