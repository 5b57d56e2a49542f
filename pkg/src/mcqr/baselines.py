"""Comparator estimators: least squares, coordinate-wise composite quantile
regression and spatial (geometric-median) quantile regression."""

from dataclasses import dataclass, field
import warnings

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix, hstack, identity, kron

from .errors import InvalidConfig, RankDeficient, SolverStalled


@dataclass
class Coefficients:
    """Fitted coefficient matrix ``b`` (d x p) plus an optional intercept."""

    b: np.ndarray
    intercept: np.ndarray = None
    converged: bool = True
    iterations: int = 0
    info: dict = field(default_factory=dict)


def fit_ols(dataset):
    """Least squares without intercept, b = ((X^T X)^{-1} X^T Y)^T."""
    X, Y = dataset.X, dataset.Y
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise RankDeficient("X^T X is singular")
    coef, *_ = np.linalg.lstsq(X, Y, rcond=None)
    return Coefficients(b=coef.T)


@dataclass
class CqrConfig:
    """Composite quantile regression with levels tau_k = k / (K + 1)."""

    K: int = 19

    def __post_init__(self):
        if int(self.K) < 1:
            raise InvalidConfig("K must be >= 1")
        self.K = int(self.K)

    @property
    def levels(self):
        return np.arange(1, self.K + 1) / (self.K + 1.0)


def check_loss(t, tau):
    """rho_tau(t) = max(t, 0) + (tau - 1) t."""
    return np.maximum(t, 0.0) + (tau - 1.0) * t


def cqr_objective(x, y, b, q, levels):
    x = np.asarray(x, dtype=float).reshape(len(y), -1)
    r = np.asarray(y, dtype=float) - x @ np.asarray(b, dtype=float)
    return float(sum(check_loss(r - qk, t).sum() for qk, t in zip(q, levels)))


def fit_cqr_1d(x, y, config=None):
    """Minimize sum_i sum_k rho_{tau_k}(y_i - b.x_i - q_k) exactly.

    Solved as a linear program with split slacks ``u+ - u- = residual``.
    ``x`` may have zero columns, in which case ``q`` are sample quantiles.
    Returns ``(b, q)`` with ``b`` of length p and ``q`` sorted ascending.
    """
    config = config or CqrConfig()
    y = np.asarray(y, dtype=float).ravel()
    n = y.shape[0]
    x = np.asarray(x, dtype=float).reshape(n, -1)
    p, K = x.shape[1], config.K
    tau = config.levels
    if p and np.linalg.matrix_rank(x) < p:
        warnings.warn("covariates are rank deficient; b is not unique", RuntimeWarning)

    # rows ordered (k, i); columns [b | q | u+ | u-]
    blocks = []
    if p:
        blocks.append(coo_matrix(np.tile(x, (K, 1))))
    blocks.append(kron(identity(K), np.ones((n, 1))))
    eye = identity(n * K)
    blocks += [eye, -eye]
    A = hstack(blocks).tocsc()
    w = np.repeat(tau, n) / n
    c = np.concatenate([np.zeros(p + K), w, 1.0 / n - w])
    bounds = [(None, None)] * (p + K) + [(0, None)] * (2 * n * K)
    res = linprog(c, A_eq=A, b_eq=np.tile(y, K), bounds=bounds, method="highs")
    if res.status != 0:
        raise SolverStalled(f"CQR linear program failed: {res.message}")
    b = res.x[:p]
    q = np.sort(res.x[p:p + K])
    return b, q


def fit_coorcqr(dataset, config=None):
    """Univariate CQR applied separately to every response coordinate."""
    config = config or CqrConfig()
    rows, qs = [], []
    for j in range(dataset.d):
        b, q = fit_cqr_1d(dataset.X, dataset.Y[:, j], config)
        rows.append(b)
        qs.append(q)
    return Coefficients(b=np.vstack(rows), info={"quantiles": np.vstack(qs)})


@dataclass
class SpqrConfig:
    """Spatial quantile regression at level ``tau`` along unit ``direction``.

    ``tau = 0`` is geometric-median regression and ignores ``direction``.
    """

    direction: np.ndarray = None
    tau: float = 0.0
    smoothing_eps: float = 1e-8
    max_iters: int = 10_000
    tol: float = 1e-8

    def __post_init__(self):
        if not 0.0 <= self.tau <= 1.0:
            raise InvalidConfig("tau must lie in [0, 1]")
        if self.smoothing_eps <= 0:
            raise InvalidConfig("smoothing_eps must be positive")
        if self.tau > 0:
            if self.direction is None:
                raise InvalidConfig("a direction is required when tau > 0")
            u = np.asarray(self.direction, dtype=float).ravel()
            if abs(np.linalg.norm(u) - 1.0) > 1e-9:
                raise InvalidConfig("direction must have unit norm")
            self.direction = u


def spqr_objective(R, config, v=None):
    """(1/n) sum sqrt(|r_i|^2 + eps) + tau u^T mean(r)."""
    val = np.mean(np.sqrt(np.sum(R * R, axis=1) + config.smoothing_eps))
    if config.tau > 0:
        val += config.tau * float(config.direction @ R.mean(axis=0))
    return float(val)


def fit_spqr(dataset, config=None):
    """Smoothed spatial quantile regression with intercept by majorize-minimize.

    Each step minimizes the quadratic majorizer of the smoothed norm at the
    current residuals (a weighted least-squares solve); a backtracking
    damping step guards against round-off increases. The objective history
    is kept in ``info["history"]`` and is non-increasing.
    """
    config = config or SpqrConfig()
    X, Y = dataset.X, dataset.Y
    n, p = X.shape
    d = Y.shape[1]
    Z = np.hstack([X, np.ones((n, 1))])
    if np.linalg.matrix_rank(Z) < p + 1:
        raise RankDeficient("design [X, 1] is rank deficient")
    lin = np.zeros((d, p + 1))
    if config.tau > 0:
        lin = n * config.tau * np.outer(config.direction, Z.mean(axis=0))
    scale = 1.0 + np.sqrt(np.mean(np.sum(Y * Y, axis=1)))

    coef, *_ = np.linalg.lstsq(Z, Y, rcond=None)
    theta = coef.T
    R = Y - Z @ theta.T
    obj = spqr_objective(R, config)
    history = [obj]
    converged = False
    it = 0
    grad = np.inf
    while it < config.max_iters:
        w = 1.0 / np.sqrt(np.sum(R * R, axis=1) + config.smoothing_eps)
        grad = -((w[:, None] * R).T @ Z + lin) / n
        gnorm = np.linalg.norm(grad) / scale
        if gnorm <= config.tol:
            converged = True
            break
        G = (Z * w[:, None]).T @ Z
        rhs = (Y * w[:, None]).T @ Z + lin
        target = np.linalg.solve(G, rhs.T).T
        step = 1.0
        while True:
            cand = theta + step * (target - theta)
            Rc = Y - Z @ cand.T
            oc = spqr_objective(Rc, config)
            if oc <= obj or step < 1e-10:
                break
            step *= 0.5
        it += 1
        if oc > obj:
            break
        stalled = obj - oc <= 1e-15 * abs(obj)
        theta, R, obj = cand, Rc, oc
        history.append(obj)
        if stalled:
            w = 1.0 / np.sqrt(np.sum(R * R, axis=1) + config.smoothing_eps)
            grad = -((w[:, None] * R).T @ Z + lin) / n
            converged = np.linalg.norm(grad) / scale <= max(config.tol, 1e-6)
            break
    return Coefficients(b=theta[:, :p], intercept=theta[:, p], converged=bool(converged),
                        iterations=it, info={"history": np.array(history),
                                             "grad_norm": float(np.linalg.norm(grad))})
