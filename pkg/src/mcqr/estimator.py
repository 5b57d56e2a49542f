"""Multiple-output composite quantile regression through optimal transport.

The empirical loss is the Wasserstein product between the residual cloud
``{Y_i - b X_i}`` and a reference sample ``{U_k}``::

    L(b) = max_pi sum_ij pi_ij <U_i, Y_j - b X_j>

over couplings ``pi`` with uniform marginals. ``L`` is convex and piecewise
linear in ``b``. Its minimum equals the linear program

    max_pi  Tr(U^T pi Y)   s.t.  U^T pi X = 0,

whose multipliers on the ``d * p`` equality rows are the minimizer ``b``.
"""

from dataclasses import dataclass, field
import time

import numpy as np

from . import _sidesimplex as side
from .core_math import RngStream, as_rng
from .dataset import RegressionDataset
from .errors import (DegenerateInput, DimensionError, DualRecoveryFailed,
                     Infeasible, InvalidConfig, SolverStalled)
from .ot_solver import (Coupling, TransportTree, _cost_scale, coupling_inner,
                        wasserstein_product)
from .sampling import ReferenceModel, sample_reference

SOLVERS = ("exact_lp", "subgradient")


@dataclass
class McqrConfig:
    """Settings shared by both MCQR solvers.

    ``m = None`` uses ``m = n`` reference points. ``init`` picks the starting
    point of the iterative solver: least squares (``"ols"``, used when
    ``n > p``) or the zero matrix. ``backend`` selects the exact LP engine:
    the partitioned network simplex (``"network"``) or a dense HiGHS model
    (``"highs"``, small problems only, meant for cross-checks).
    """

    reference: ReferenceModel = None
    m: int = None
    solver: str = "exact_lp"
    max_iters: int = 5000
    step_scale: float = 1.0
    tol_grad: float = 1e-6
    tol_gap: float = 1e-7
    center_covariates: bool = True
    init: str = "ols"
    backend: str = "network"

    def __post_init__(self):
        if self.solver not in SOLVERS:
            raise InvalidConfig(f"unknown solver {self.solver!r}")
        if self.m is not None and int(self.m) < 1:
            raise InvalidConfig("m must be >= 1")
        if self.max_iters < 0:
            raise InvalidConfig("max_iters must be >= 0")
        if not (self.tol_grad > 0 and self.tol_gap > 0 and self.step_scale > 0):
            raise InvalidConfig("tolerances and step scale must be positive")
        if self.init not in ("ols", "zero"):
            raise InvalidConfig(f"unknown init {self.init!r}")
        if self.backend not in ("network", "highs"):
            raise InvalidConfig(f"unknown backend {self.backend!r}")


@dataclass
class McqrFit:
    b_hat: np.ndarray
    objective: float
    grad_residual: float
    iterations: int
    solver_used: str
    converged: bool = True
    lp_value: float = None
    reference_points: np.ndarray = None
    coupling: object = None
    runtime_ms: float = 0.0
    info: dict = field(default_factory=dict)


def mcqr_loss(dataset, b, reference_points):
    """Wasserstein product of the residual cloud and the reference cloud."""
    U = np.atleast_2d(np.asarray(reference_points, dtype=float))
    R = dataset.residuals(b)
    if U.shape[1] != R.shape[1]:
        raise DimensionError(f"reference points are {U.shape[1]}-dimensional, "
                             f"responses {R.shape[1]}-dimensional")
    return wasserstein_product(R, U)


def _reference(dataset, config, rng, reference_points):
    if reference_points is not None:
        U = np.atleast_2d(np.asarray(reference_points, dtype=float))
        if U.shape[1] != dataset.d:
            raise DimensionError("reference dimension differs from response dimension")
        return U
    ref = config.reference or ReferenceModel("standard_gaussian", dataset.d)
    if ref.d != dataset.d:
        raise DimensionError("reference dimension differs from response dimension")
    m = dataset.n if config.m is None else int(config.m)
    return sample_reference(ref, m, as_rng(rng) if rng is not None else RngStream(0))


def _prepare(dataset, config):
    X = dataset.X
    if config.center_covariates:
        X = X - X.mean(axis=0)
    scale = np.max(np.abs(X), axis=0)
    if np.any(scale <= 1e-12 * max(1.0, np.max(np.abs(dataset.X)))):
        raise DegenerateInput("a covariate column is constant; b is not identifiable")
    return X


def _ols_start(X, Y, config):
    n, p = X.shape
    if config.init == "zero" or n <= p:
        return np.zeros((Y.shape[1], p))
    coef, *_ = np.linalg.lstsq(X, Y, rcond=None)
    return coef.T


def _finish(fit, t0):
    fit.runtime_ms = 1000.0 * (time.perf_counter() - t0)
    return fit


def fit_mcqr_lp(dataset, config=None, rng=None, reference_points=None):
    """Exact MCQR fit: solve the constrained transport LP, read b from its
    multipliers and confirm that the loss at b equals the LP value."""
    t0 = time.perf_counter()
    config = config or McqrConfig()
    U = _reference(dataset, config, rng, reference_points)
    X = _prepare(dataset, config)
    Y = dataset.Y
    if config.backend == "highs":
        b_hat, value, plan, iters = _lp_highs(U, Y, X)
    else:
        b_hat, value, plan, iters = _lp_network(U, Y, X, config)
    G = plan.apply(U, X)
    centered = RegressionDataset(X, Y)
    loss = mcqr_loss(centered, b_hat, U)
    if abs(loss - value) > config.tol_gap * (1.0 + abs(value)):
        raise DualRecoveryFailed(
            f"loss at recovered b is {loss!r}, LP value {value!r}")
    fit = McqrFit(b_hat=b_hat, objective=loss, grad_residual=float(np.linalg.norm(G)),
                  iterations=iters, solver_used=f"exact_lp/{config.backend}",
                  converged=True, lp_value=value, reference_points=U,
                  coupling=plan, info={"feasibility_inf": float(np.max(np.abs(G)))})
    return _finish(fit, t0)


# degeneracy-breaking node perturbation, in units of one transported atom
PERTURB = 1e-7


def _lp_network(U, Y, X, config):
    m, d = U.shape
    n, p = X.shape
    cs = _cost_scale(U, Y)
    su = np.max(np.abs(U), axis=0)
    su[su == 0] = 1.0
    sx = np.max(np.abs(X), axis=0)
    Uc = np.ascontiguousarray(U / cs)
    Us = np.ascontiguousarray(U / su)
    Xs = np.ascontiguousarray(X / sx)
    Yc = np.ascontiguousarray(Y)
    srow = np.outer(su, sx)

    b0 = _ols_start(X, Y, config)
    z0 = np.ascontiguousarray((-b0 * srow / cs).ravel())
    tree = TransportTree(m, n)
    tree.optimize(Uc, np.ascontiguousarray(Y - X @ b0.T))
    parent = tree.parent.copy()
    flow = tree.flow.copy()
    perturb = PERTURB * (1.0 + np.random.default_rng(m * 7919 + n).random(m + n))
    mu = 0.1 * (1.0 + np.max(np.abs(z0), initial=0.0))
    stats = np.zeros(4, dtype=np.int64)
    N = m + n
    status, it, z, phi, ekind, ei, ej, ex = side.side_simplex(
        Uc, Yc, Us, Xs, z0, tree.root, parent, flow, 1e-11, 1e-9, mu, 1e12,
        perturb, 200 * N * (d * p + 1) + 10 ** 5, 64, 5 * N, 0, 1, stats)
    if status == side.INFEASIBLE:
        raise Infeasible("side constraints U^T pi X = 0 cannot be met")
    if status != side.OPTIMAL:
        raise SolverStalled(f"side-constrained simplex stopped with status {status}")

    rows, cols, vals = [], [], []
    v = np.arange(N)
    keep = v != tree.root
    v, par, f = v[keep], parent[keep], flow[keep]
    rows.append(np.where(v < m, v, par))
    cols.append(np.where(v < m, par - m, v - m))
    vals.append(f)
    arcs = ekind == 0
    rows.append(ei[arcs])
    cols.append(ej[arcs])
    vals.append(ex[arcs])
    rows, cols, vals = map(np.concatenate, (rows, cols, vals))
    if np.min(vals, initial=0.0) < -1e-5:
        raise SolverStalled("final basis is not primal feasible")
    vals = np.clip(vals, 0.0, None)
    nz = vals > 0
    plan = Coupling(rows[nz].astype(np.int64), cols[nz].astype(np.int64),
                    vals[nz] / (m * n), (m, n))
    value = coupling_inner(plan, U, Y)
    b_hat = -z.reshape(d, p) * cs / srow
    return b_hat, value, plan, int(it)


def _lp_highs(U, Y, X):
    """Dense LP through scipy's HiGHS; an independent check for small sizes."""
    from scipy.optimize import linprog
    from scipy.sparse import coo_matrix, vstack

    m, d = U.shape
    n, p = X.shape
    if m * n > 3600:
        raise InvalidConfig("the dense backend is limited to m * n <= 3600")
    idx = np.arange(m * n).reshape(m, n)
    rows_eq = coo_matrix((np.ones(m * n), (np.repeat(np.arange(m), n), idx.ravel())),
                         shape=(m, m * n))
    cols_eq = coo_matrix((np.ones(m * n), (np.tile(np.arange(n), m), idx.ravel())),
                         shape=(n, m * n))
    side_rows = np.einsum("ik,jl->klij", U, X).reshape(d * p, m * n)
    A = vstack([rows_eq, cols_eq.tocsr()[:-1], coo_matrix(side_rows)]).tocsr()
    rhs = np.concatenate([np.full(m, 1.0 / m), np.full(n - 1, 1.0 / n), np.zeros(d * p)])
    res = linprog(-(U @ Y.T).ravel(), A_eq=A, b_eq=rhs, bounds=(0, None), method="highs")
    if res.status == 2:
        raise Infeasible("side constraints U^T pi X = 0 cannot be met")
    if res.status != 0:
        raise SolverStalled(f"HiGHS returned status {res.status}: {res.message}")
    b_hat = -res.eqlin.marginals[m + n - 1:].reshape(d, p)
    pi = np.clip(res.x, 0.0, None).reshape(m, n)
    r, c = np.nonzero(pi)
    plan = Coupling(r.astype(np.int64), c.astype(np.int64), pi[r, c], (m, n))
    return b_hat, -res.fun, plan, int(res.nit)


def fit_mcqr_subgradient(dataset, config=None, rng=None, reference_points=None):
    """Subgradient descent on L(b) with one exact transport solve per step.

    Step t moves ``b`` by ``eta_t * U^T pi_t X`` with
    ``eta_t = step_scale / (sqrt(t) * |U^T pi_1 X|_F)``; the best iterate by
    loss is returned.
    """
    t0 = time.perf_counter()
    config = config or McqrConfig(solver="subgradient")
    U = _reference(dataset, config, rng, reference_points)
    X = _prepare(dataset, config)
    Y = dataset.Y
    m, n = U.shape[0], X.shape[0]
    cs = _cost_scale(U, Y)
    Uc = np.ascontiguousarray(U / cs)
    tree = TransportTree(m, n)

    def oracle(b):
        R = Y - X @ b.T
        tree.optimize(Uc, np.ascontiguousarray(R))
        plan = tree.coupling()
        return coupling_inner(plan, U, R), plan.apply(U, X), plan

    b = _ols_start(X, Y, config)
    loss, G, plan = oracle(b)
    best = (loss, b.copy(), G, plan)
    g1 = np.linalg.norm(G)
    converged = g1 <= config.tol_grad
    it = 0
    while not converged and it < config.max_iters:
        it += 1
        b = b + config.step_scale / (np.sqrt(it) * g1) * G
        loss, G, plan = oracle(b)
        if loss < best[0]:
            best = (loss, b.copy(), G, plan)
        if np.linalg.norm(G) <= config.tol_grad:
            converged = True
    loss, b, G, plan = best
    fit = McqrFit(b_hat=b, objective=float(loss), grad_residual=float(np.linalg.norm(G)),
                  iterations=it, solver_used="subgradient", converged=bool(converged),
                  reference_points=U, coupling=plan)
    return _finish(fit, t0)


def fit_mcqr(dataset, config=None, rng=None, reference_points=None):
    """Dispatch on ``config.solver``."""
    config = config or McqrConfig()
    if config.solver == "subgradient":
        return fit_mcqr_subgradient(dataset, config, rng, reference_points)
    return fit_mcqr_lp(dataset, config, rng, reference_points)
