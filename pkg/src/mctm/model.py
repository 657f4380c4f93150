"""Model specification, parameter packing and the triangular-factor algebra.

A model couples J marginal transformations (one :class:`ConditionalBasis`
each) through a unit-lower-triangular factor Lambda whose below-diagonal
entries may depend on covariates. With a standard-normal reference the
latent vector of transformed responses is N(0, Sigma) with
Sigma = Lambda^{-1} Lambda^{-T}, i.e. a Gaussian copula whose correlation
structure may vary with x.
"""

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import expit, logit, ndtr, ndtri

from .basis import BernsteinBasis, ConditionalBasis, CovariateBasis, Support
from .exceptions import ConfigurationError

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)

REFERENCE_KINDS = ("normal", "logistic", "min-extreme")


@dataclass(frozen=True)
class ReferenceDistribution:
    """Reference law the transformed responses are driven to.

    All three kinds have log-concave densities. ``min-extreme`` is the
    minimum extreme-value law F(z) = 1 - exp(-exp(z)) (cloglog link).
    """

    kind: str = "normal"

    def __post_init__(self):
        if self.kind not in REFERENCE_KINDS:
            raise ConfigurationError(f"unknown reference distribution {self.kind!r}")

    def cdf(self, z):
        z = np.asarray(z, dtype=np.float64)
        if self.kind == "normal":
            return ndtr(z)
        if self.kind == "logistic":
            return expit(z)
        return -np.expm1(-np.exp(z))

    def logpdf(self, z):
        z = np.asarray(z, dtype=np.float64)
        if self.kind == "normal":
            return -0.5 * z * z - _LOG_SQRT_2PI
        if self.kind == "logistic":
            a = np.abs(z)
            return -a - 2.0 * np.log1p(np.exp(-a))
        return z - np.exp(z)

    def pdf(self, z):
        return np.exp(self.logpdf(z))

    def ppf(self, p):
        p = np.asarray(p, dtype=np.float64)
        if self.kind == "normal":
            return ndtri(p)
        if self.kind == "logistic":
            return logit(p)
        return np.log(-np.log1p(-p))


NORMAL_REFERENCE = ReferenceDistribution("normal")


@dataclass(frozen=True)
class ModelSpec:
    """Declarative description of a transformation model.

    Indices are 0-based; ``lambda_bases`` maps strictly-lower-triangular
    pairs (j, k), k < j, to the covariate basis of that dependence
    coefficient. Pairs in ``fixed_zero`` are constrained to zero and carry
    no parameters; every below-diagonal pair must appear in exactly one of
    the two.
    """

    margins: tuple
    lambda_bases: Mapping = field(default_factory=dict)
    fixed_zero: frozenset = frozenset()
    reference: ReferenceDistribution = NORMAL_REFERENCE
    n_covariates: int = 0

    def __post_init__(self):
        if len(self.margins) < 1:
            raise ConfigurationError("at least one margin is required")
        object.__setattr__(self, "margins", tuple(self.margins))
        object.__setattr__(self, "lambda_bases", dict(self.lambda_bases))
        object.__setattr__(self, "fixed_zero", frozenset(self.fixed_zero))
        J = len(self.margins)
        pairs = {(j, k) for j in range(J) for k in range(j)}
        free = set(self.lambda_bases)
        for j, k in free | set(self.fixed_zero):
            if (j, k) not in pairs:
                raise ConfigurationError(f"({j},{k}) is not below the diagonal")
        if free & self.fixed_zero:
            raise ConfigurationError("a pair cannot be both free and fixed to zero")
        if free | self.fixed_zero != pairs:
            missing = sorted(pairs - free - self.fixed_zero)
            raise ConfigurationError(f"pairs {missing} have no basis and are not fixed")
        for j, cb in enumerate(self.margins):
            if cb.kind != "unconditional" and cb.n_covariates != self.n_covariates:
                raise ConfigurationError(
                    f"margin {j} expects {cb.n_covariates} covariates, "
                    f"model declares {self.n_covariates}"
                )
        for (j, k), cv in self.lambda_bases.items():
            if cv.kind == "linear" and cv.n_covariates != self.n_covariates:
                raise ConfigurationError(f"lambda({j},{k}) covariate dimension mismatch")
            if cv.kind == "bernstein" and self.n_covariates != 1:
                raise ConfigurationError("bernstein lambda terms need one covariate")

    @property
    def J(self):
        return len(self.margins)

    @classmethod
    def build(cls, margins, n_covariates=0, lambda_basis=None, fixed_zero=(),
              reference=NORMAL_REFERENCE):
        """Spec with one shared covariate basis for all free lambda entries."""
        if lambda_basis is None:
            lambda_basis = CovariateBasis("intercept")
        fixed = frozenset(tuple(p) for p in fixed_zero)
        J = len(margins)
        bases = {
            (j, k): lambda_basis
            for j in range(J) for k in range(j) if (j, k) not in fixed
        }
        return cls(tuple(margins), bases, fixed, reference, n_covariates)


@dataclass(frozen=True)
class ParamLayout:
    """Index map between the flat parameter vector and its blocks.

    Order: margin coefficient blocks theta_1..theta_J, then the free
    lambda blocks in row-major lower-triangle order.
    """

    margin_slices: tuple
    lambda_slices: tuple  # ((j, k), slice) pairs, ordered
    size: int

    @classmethod
    def from_spec(cls, spec):
        pos = 0
        margin_slices = []
        for cb in spec.margins:
            margin_slices.append(slice(pos, pos + cb.dim))
            pos += cb.dim
        lambda_slices = []
        for (j, k) in sorted(spec.lambda_bases):
            d = spec.lambda_bases[(j, k)].dim
            lambda_slices.append(((j, k), slice(pos, pos + d)))
            pos += d
        return cls(tuple(margin_slices), tuple(lambda_slices), pos)

    def lambda_slice(self, j, k):
        for pair, sl in self.lambda_slices:
            if pair == (j, k):
                return sl
        raise KeyError((j, k))

    def unpack(self, theta):
        """Flat vector -> (list of margin blocks, {(j,k): gamma block})."""
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.size,):
            raise ConfigurationError(
                f"parameter vector has length {theta.size}, expected {self.size}"
            )
        varthetas = [theta[sl] for sl in self.margin_slices]
        gammas = {pair: theta[sl] for pair, sl in self.lambda_slices}
        return varthetas, gammas

    def pack(self, varthetas, gammas):
        """Inverse of :meth:`unpack`; lossless round trip."""
        theta = np.empty(self.size)
        if len(varthetas) != len(self.margin_slices):
            raise ConfigurationError("wrong number of margin blocks")
        for sl, block in zip(self.margin_slices, varthetas):
            block = np.asarray(block, dtype=np.float64)
            if block.size != sl.stop - sl.start:
                raise ConfigurationError("margin block length mismatch")
            theta[sl] = block
        for pair, sl in self.lambda_slices:
            block = np.asarray(gammas[pair], dtype=np.float64)
            if block.size != sl.stop - sl.start:
                raise ConfigurationError(f"lambda block {pair} length mismatch")
            theta[sl] = block
        return theta

    def names(self):
        """Human-readable parameter names (1-based indices)."""
        out = [None] * self.size
        for j, sl in enumerate(self.margin_slices):
            for i in range(sl.stop - sl.start):
                out[sl.start + i] = f"m{j + 1}.theta{i}"
        for (j, k), sl in self.lambda_slices:
            for i in range(sl.stop - sl.start):
                out[sl.start + i] = f"lambda{j + 1}{k + 1}.g{i}"
        return out


@dataclass(frozen=True)
class CopulaSummary:
    """Latent covariance implied by a triangular factor."""

    sigma: np.ndarray   # (J, J) covariance, symmetric positive definite
    sigma2: np.ndarray  # (J,) diagonal
    corr: np.ndarray    # (J, J) correlation matrix


def lambda_rows(spec, theta, X):
    """Per-row triangular factors Lambda(x_i), shape (n, J, J)."""
    layout = ParamLayout.from_spec(spec)
    _, gammas = layout.unpack(theta)
    X = np.atleast_2d(np.asarray(X, dtype=np.float64)) if X is not None else None
    if spec.n_covariates == 0:
        n = 1 if X is None or X.size == 0 else X.shape[0]
    else:
        if X is None or X.shape[1] != spec.n_covariates:
            raise ConfigurationError(
                f"model needs {spec.n_covariates} covariates"
            )
        n = X.shape[0]
    J = spec.J
    lam = np.zeros((n, J, J))
    lam[:, np.arange(J), np.arange(J)] = 1.0
    for (j, k), cv in spec.lambda_bases.items():
        design = cv.design(np.zeros((n, 0)) if X is None else X)
        lam[:, j, k] = design @ gammas[(j, k)]
    return lam


def assemble_lambda(spec, theta, x=None):
    """Triangular factor Lambda(x) as a (J, J) matrix."""
    X = None if x is None else np.atleast_2d(np.asarray(x, dtype=np.float64))
    return lambda_rows(spec, theta, X)[0]


def unit_lower_inverse(lam):
    """Inverse of unit-lower-triangular matrices, batched over axis 0."""
    lam = np.asarray(lam, dtype=np.float64)
    squeeze = lam.ndim == 2
    if squeeze:
        lam = lam[None]
    n, J, _ = lam.shape
    inv = np.zeros_like(lam)
    inv[:, np.arange(J), np.arange(J)] = 1.0
    for j in range(1, J):
        for k in range(j):
            acc = -lam[:, j, k]
            for m in range(k + 1, j):
                acc -= lam[:, j, m] * inv[:, m, k]
            inv[:, j, k] = acc
    return inv[0] if squeeze else inv


def sigma_from_lambda(lam):
    """Latent covariance Sigma = Lambda^{-1} Lambda^{-T} and its correlation.

    Positive definite by construction for any unit-lower-triangular factor.
    """
    lam = np.asarray(lam, dtype=np.float64)
    inv = solve_triangular(lam, np.eye(lam.shape[0]), lower=True, unit_diagonal=True)
    sigma = inv @ inv.T
    sigma2 = np.diag(sigma).copy()
    sd = np.sqrt(sigma2)
    corr = sigma / np.outer(sd, sd)
    np.fill_diagonal(corr, 1.0)
    return CopulaSummary(sigma=sigma, sigma2=sigma2, corr=corr)


def sigma_rows(lams):
    """Batched Sigma(x_i) = Lambda(x_i)^{-1} Lambda(x_i)^{-T}, shape (n, J, J)."""
    inv = unit_lower_inverse(lams)
    return np.einsum("nij,nkj->nik", inv, inv)


def lambda_to_correlation(lam):
    """Correlation -lam / sqrt(1 + lam^2) of a bivariate model's latent pair."""
    lam = np.asarray(lam, dtype=np.float64)
    return -lam / np.sqrt(1.0 + lam * lam)


def spec_from_data(Y, X=None, margin_order=6, margin_terms="none",
                   lambda_kind="constant", lambda_order=6, reference="normal",
                   fixed_zero=(), support_margin=0.0):
    """Build a :class:`ModelSpec` with supports taken from the data range.

    ``margin_terms`` selects the marginal basis kind: ``none`` (covariates
    enter the dependence structure only), ``shift`` or
    ``response-varying``. ``lambda_kind`` is one of constant/linear/
    bernstein; bernstein terms use the observed covariate range as support.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    p = 0
    if X is not None:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        p = X.shape[1]
    margin_kind = {"none": "unconditional", "shift": "shift",
                   "response-varying": "response-varying"}.get(margin_terms)
    if margin_kind is None:
        raise ConfigurationError(f"unknown margin_terms {margin_terms!r}")
    if margin_kind != "unconditional" and p == 0:
        raise ConfigurationError(f"margin_terms={margin_terms!r} needs covariates")
    margins = []
    for j in range(Y.shape[1]):
        yb = BernsteinBasis(margin_order, Support.from_data(Y[:, j], support_margin))
        margins.append(ConditionalBasis(margin_kind, yb,
                                        0 if margin_kind == "unconditional" else p))
    if lambda_kind == "constant" or p == 0:
        lb = CovariateBasis("intercept")
    elif lambda_kind == "linear":
        lb = CovariateBasis("linear", n_covariates=p)
    elif lambda_kind == "bernstein":
        if p != 1:
            raise ConfigurationError("bernstein lambda terms need exactly one covariate")
        lb = CovariateBasis("bernstein", n_covariates=1, order=lambda_order,
                            support=Support.from_data(X[:, 0], support_margin))
    else:
        raise ConfigurationError(f"unknown lambda_kind {lambda_kind!r}")
    return ModelSpec.build(margins, n_covariates=p, lambda_basis=lb,
                           fixed_zero=fixed_zero,
                           reference=ReferenceDistribution(reference))
