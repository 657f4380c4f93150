"""Constrained maximum-likelihood fitting and the asymptotic covariance.

The monotonicity of every marginal transform is enforced through the
linear inequalities D theta_j >= eps (first differences of the leading
Bernstein block), handled by an augmented-Lagrangian outer loop around an
L-BFGS-B inner solver driven by the analytic score. The strict
inequalities are relaxed to eps = 1e-8 * (support width) so the feasible
set is closed.

Fitting is deterministic for fixed data and options: the default runs no
stochastic restarts, and per-datum reductions happen in data order.
"""

import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize
from scipy.special import ndtri

from . import numdiff
from .basis import monotonicity_constraints
from .exceptions import ConfigurationError, SingularFisherError
from .likelihood import Dataset, LikelihoodEvaluator, loglik_alt_reference
from .model import ModelSpec, ParamLayout

_COND_LIMIT = 1e12


@dataclass(frozen=True)
class FitOptions:
    """Optimizer controls; all tolerances strictly positive."""

    gradient_tol: float = 1e-6       # KKT stationarity on the mean log-likelihood
    constraint_tol: float = 1e-8     # allowed violation of D theta >= eps
    max_outer: int = 100
    max_inner: int = 500
    penalty_init: float = 10.0
    penalty_growth: float = 10.0
    slack_scale: float = 1e-8        # eps = slack_scale * support width
    seed: int = 0
    restarts: int = 0                # > 0 adds seeded random restarts

    def __post_init__(self):
        if min(self.gradient_tol, self.constraint_tol, self.slack_scale) <= 0:
            raise ConfigurationError("tolerances must be positive")
        if min(self.penalty_init, self.penalty_growth) <= 0:
            raise ConfigurationError("penalty parameters must be positive")


@dataclass(frozen=True)
class FittedModel:
    """Everything downstream queries need about a fitted model."""

    spec: ModelSpec
    theta: np.ndarray
    vcov: np.ndarray | None
    loglik: float
    converged: bool
    n_outer: int
    n_evals: int
    kkt_residual: float
    max_violation: float
    active_constraints: tuple
    options: FitOptions
    message: str = ""

    @property
    def layout(self):
        return ParamLayout.from_spec(self.spec)

    @classmethod
    def from_parameters(cls, spec, theta, vcov=None):
        """Wrap explicit parameters (no fitting) for distribution queries."""
        theta = np.asarray(theta, dtype=np.float64)
        return cls(spec=spec, theta=theta, vcov=vcov, loglik=np.nan,
                   converged=True, n_outer=0, n_evals=0, kkt_residual=np.nan,
                   max_violation=0.0, active_constraints=(),
                   options=FitOptions())


def constraint_system(spec, slack_scale=1e-8):
    """Stacked inequalities A theta >= b enforcing monotone margins."""
    layout = ParamLayout.from_spec(spec)
    rows = []
    rhs = []
    for j, cb in enumerate(spec.margins):
        D = monotonicity_constraints(cb.y_basis.order)
        sl = layout.margin_slices[j]
        block = np.zeros((D.shape[0], layout.size))
        block[:, sl.start:sl.start + cb.monotone_dim] = D
        rows.append(block)
        rhs.append(np.full(D.shape[0], slack_scale * cb.support.width))
    return np.vstack(rows), np.concatenate(rhs)


def _anchor_start(cb, y, eps):
    """Normal-quantile transform of the empirical CDF at equispaced anchors,
    projected to strict monotonicity; covariate blocks zero."""
    sup = cb.support
    order = cb.y_basis.order
    anchors = sup.lo + sup.width * np.arange(order + 1) / order
    ys = np.sort(np.asarray(y, dtype=np.float64))
    n = ys.size
    ranks = np.searchsorted(ys, anchors, side="right")
    probs = np.clip(ranks / (n + 1.0), 0.5 / (n + 1.0), 1.0 - 0.5 / (n + 1.0))
    t = ndtri(probs)
    t = np.maximum.accumulate(t)
    gap = max(1e-3, 2.0 * eps)
    for m in range(1, t.size):
        if t[m] < t[m - 1] + gap:
            t[m] = t[m - 1] + gap
    out = np.zeros(cb.dim)
    out[:cb.monotone_dim] = t
    return out


def initial_values(spec, data, options=None):
    """Starting parameters: separate univariate fits per margin, Lambda = I."""
    options = options or FitOptions()
    layout = ParamLayout.from_spec(spec)
    varthetas = []
    for j, cb in enumerate(spec.margins):
        eps = options.slack_scale * cb.support.width
        start_j = _anchor_start(cb, data.Y[:, j], eps)
        sub_spec = ModelSpec((cb,), {}, frozenset(), spec.reference,
                             spec.n_covariates)
        sub_data = Dataset(data.Y[:, [j]], data.X)
        try:
            sub = fit(sub_spec, sub_data, options=replace(options, max_outer=20),
                      start=start_j, compute_vcov=False)
            varthetas.append(sub.theta)
        except Exception:
            varthetas.append(start_j)
    gammas = {pair: np.zeros(sl.stop - sl.start)
              for pair, sl in layout.lambda_slices}
    return layout.pack(varthetas, gammas)


def _repair_feasibility(theta, spec, layout, slack_scale):
    """Project margin blocks onto strictly increasing coefficients."""
    theta = theta.copy()
    for j, cb in enumerate(spec.margins):
        sl = layout.margin_slices[j]
        block = theta[sl.start:sl.start + cb.monotone_dim]
        gap = max(10.0 * slack_scale * cb.support.width, 1e-6)
        block = np.maximum.accumulate(block)
        for m in range(1, block.size):
            if block[m] < block[m - 1] + gap:
                block[m] = block[m - 1] + gap
        theta[sl.start:sl.start + cb.monotone_dim] = block
    return theta


def _alt_objective(spec, data):
    """Numeric-gradient objective for non-normal references."""
    def value(theta):
        ll = loglik_alt_reference(spec, theta, data)
        return np.inf if not np.isfinite(ll) else -ll / data.n

    def obj(theta):
        f = value(theta)
        if not np.isfinite(f):
            return 1e10, np.zeros(theta.size)
        return f, numdiff.gradient(value, theta)

    return obj


def fit(spec, data, options=None, start=None, compute_vcov=True):
    """Maximum likelihood with monotonicity constraints.

    Returns a :class:`FittedModel`; non-convergence is reported through
    ``converged``/``message``, never silently.
    """
    options = options or FitOptions()
    ev = LikelihoodEvaluator(spec, data)
    layout = ev.layout
    if data.n <= layout.size:
        warnings.warn(
            f"n = {data.n} rows for {layout.size} parameters; "
            "estimates will be unstable", UserWarning, stacklevel=2)
    A, b = constraint_system(spec, options.slack_scale)

    if start is None:
        theta = initial_values(spec, data, options)
    else:
        theta = np.asarray(start, dtype=np.float64).copy()
        if theta.shape != (layout.size,):
            raise ConfigurationError(
                f"start has length {theta.size}, expected {layout.size}")
    if np.min(A @ theta - b) < 0:
        theta = _repair_feasibility(theta, spec, layout, options.slack_scale)

    objective = ev.objective if spec.reference.kind == "normal" \
        else _alt_objective(spec, data)

    mu = np.zeros(b.size)
    rho = options.penalty_init
    viol_prev = np.inf
    n_evals = 0
    kkt = np.inf
    viol = np.inf
    converged = False
    n_outer = 0

    def al_objective(th):
        f, g = objective(th)
        gvec = A @ th - b
        act = gvec <= mu / rho
        f += float(np.sum(-mu[act] * gvec[act] + 0.5 * rho * gvec[act] ** 2))
        f += float(np.sum(-mu[~act] ** 2 / (2.0 * rho)))
        g = g + A[act].T @ (rho * gvec[act] - mu[act])
        return f, g

    for n_outer in range(1, options.max_outer + 1):
        res = minimize(al_objective, theta, jac=True, method="L-BFGS-B",
                       options={"maxiter": options.max_inner,
                                "ftol": 1e-14,
                                "gtol": 0.3 * options.gradient_tol,
                                "maxcor": 20})
        theta = res.x
        n_evals += res.nfev
        gvec = A @ theta - b
        viol = max(0.0, float(-np.min(gvec)))
        mu_new = np.maximum(0.0, mu - rho * gvec)
        _, grad_f = objective(theta)
        kkt = float(np.max(np.abs(grad_f - A.T @ (-mu_new))))
        if viol <= options.constraint_tol and kkt <= options.gradient_tol:
            converged = True
            mu = mu_new
            break
        if viol > 0.25 * viol_prev and viol > options.constraint_tol:
            rho *= options.penalty_growth
        mu = mu_new
        viol_prev = viol

    gvec = A @ theta - b
    active = tuple(np.flatnonzero(gvec <= 10.0 * options.constraint_tol).tolist())
    if spec.reference.kind == "normal":
        ll = ev.loglik(theta)
    else:
        ll = loglik_alt_reference(spec, theta, data)

    message = "converged" if converged else (
        f"stopped after {n_outer} outer iterations: "
        f"kkt={kkt:.2e}, violation={viol:.2e}")
    vcov = None
    if compute_vcov:
        try:
            vcov = _vcov_at(spec, theta, data, ev)
        except SingularFisherError as exc:
            message += f"; vcov unavailable ({exc})"

    return FittedModel(spec=spec, theta=theta, vcov=vcov, loglik=ll,
                       converged=converged, n_outer=n_outer, n_evals=n_evals,
                       kkt_residual=kkt, max_violation=viol,
                       active_constraints=active, options=options,
                       message=message)


def _vcov_at(spec, theta, data, ev=None):
    if spec.reference.kind == "normal":
        ev = ev or LikelihoodEvaluator(spec, data)
        F = ev.fisher(theta)
    else:
        def nll(th):
            return -loglik_alt_reference(spec, th, data)
        F = numdiff.hessian(nll, theta)
        F = 0.5 * (F + F.T)
    eigvals, eigvecs = np.linalg.eigh(F)
    names = ParamLayout.from_spec(spec).names()
    if eigvals[0] <= 0 or eigvals[-1] / eigvals[0] > _COND_LIMIT:
        worst = eigvecs[:, 0]
        leads = np.argsort(-np.abs(worst))[:3]
        detail = ", ".join(f"{names[i]} ({worst[i]:+.2f})" for i in leads)
        raise SingularFisherError(
            "Fisher information is singular or ill-conditioned; "
            f"nearly unidentified direction loads on {detail}")
    V = eigvecs @ np.diag(1.0 / eigvals) @ eigvecs.T
    return 0.5 * (V + V.T)


def asymptotic_covariance(fitted, data):
    """Inverse observed Fisher information at the fitted parameters.

    Raises :class:`SingularFisherError` (naming the nearly unidentified
    directions) when the information matrix cannot be inverted reliably.
    """
    if not fitted.converged:
        warnings.warn("covariance requested for a non-converged fit",
                      UserWarning, stacklevel=2)
    return _vcov_at(fitted.spec, fitted.theta, data)
