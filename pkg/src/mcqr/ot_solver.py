"""Exact optimal transport between uniformly weighted point clouds.

The solver is a primal network simplex on the bipartite transportation graph
(see ``_netsimplex``). Squared-distance costs differ from ``-<a_i, b_j>`` only
by terms that depend on one endpoint, so the kernels work with the bilinear
cost and never build the ``m x n`` cost matrix.
"""

from dataclasses import dataclass

import numpy as np

from . import _netsimplex as ns
from .core_math import as_matrix, check_spd, psd_sqrt
from .errors import DimensionError, EmptyInput, SolverStalled

PRICING_EPS = 1e-11
REFRESH = 2000


@dataclass
class PointCloud:
    """Finite point set with uniform weights 1/k."""

    points: np.ndarray

    def __post_init__(self):
        self.points = as_matrix(self.points, "points")
        if self.points.shape[0] < 1:
            raise EmptyInput("point cloud is empty")

    @property
    def size(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]

    def second_moment(self):
        return float(np.mean(np.sum(self.points ** 2, axis=1)))


@dataclass
class Coupling:
    """Sparse transport plan; ``mass[t]`` sits at ``(rows[t], cols[t])``."""

    rows: np.ndarray
    cols: np.ndarray
    mass: np.ndarray
    shape: tuple

    def to_dense(self):
        pi = np.zeros(self.shape)
        np.add.at(pi, (self.rows, self.cols), self.mass)
        return pi

    def row_sums(self):
        return np.bincount(self.rows, self.mass, minlength=self.shape[0])

    def col_sums(self):
        return np.bincount(self.cols, self.mass, minlength=self.shape[1])

    @property
    def nnz(self):
        return int(np.count_nonzero(self.mass > 0))

    def apply(self, left, right):
        """Return ``left^T pi right`` without forming ``pi``."""
        w = self.mass[:, None, None]
        return np.sum(w * left[self.rows][:, :, None] * right[self.cols][:, None, :],
                      axis=0)


@dataclass
class OtSolution:
    coupling: Coupling
    objective: float
    dual_row: np.ndarray
    dual_col: np.ndarray
    pivots: int = 0

    @property
    def dual_objective(self):
        return float(np.mean(self.dual_row) + np.mean(self.dual_col))

    @property
    def duality_gap(self):
        return abs(self.objective - self.dual_objective)


def _as_points(x):
    if isinstance(x, PointCloud):
        return x.points
    return PointCloud(x).points


def kd_orders(a, b):
    """Row and column orders that pair nearby points block by block.

    Both clouds are split recursively at the median along alternating
    principal axes; b is cut at the proportional count. Feeding these orders
    to the north-west corner rule gives a cheap, nearly optimal start (exact
    in one dimension, where it reduces to sorting).
    """
    m, d = a.shape
    n = b.shape[0]
    pooled = np.vstack([a, b])
    center = pooled.mean(axis=0)
    if d > 1:
        _, _, vt = np.linalg.svd(pooled - center, full_matrices=False)
        ra = (a - center) @ vt.T
        rb = (b - center) @ vt.T
    else:
        ra = a - center
        rb = b - center
    rows = []
    cols = []
    stack = [(np.arange(m), np.arange(n), 0)]
    while stack:
        ia, ib, level = stack.pop()
        ax = level % d
        oa = ia[np.argsort(ra[ia, ax], kind="stable")]
        ob = ib[np.argsort(rb[ib, ax], kind="stable")]
        if len(ia) <= 2 or len(ib) <= 2 or level >= 60:
            rows.append(oa)
            cols.append(ob)
            continue
        ha = len(oa) // 2
        hb = int(round(len(ob) * ha / len(oa)))
        stack.append((oa[ha:], ob[hb:], level + 1))
        stack.append((oa[:ha], ob[:hb], level + 1))
    return np.concatenate(rows), np.concatenate(cols)


class TransportTree:
    """Network simplex state for one (m, n) problem size.

    The spanning tree depends only on the flows, so a tree that was optimal
    for one set of costs is a valid warm start for another; the iterative
    MCQR solver relies on this.
    """

    def __init__(self, m, n):
        self.m = m
        self.n = n
        N = m + n
        self.parent = np.empty(N, dtype=np.int64)
        self.flow = np.zeros(N)
        self.pi = np.zeros(N)
        self.depth = np.zeros(N, dtype=np.int64)
        self.fch = np.empty(N, dtype=np.int64)
        self.nsib = np.empty(N, dtype=np.int64)
        self.psib = np.empty(N, dtype=np.int64)
        self.stack = np.empty(N, dtype=np.int64)
        self.root = -1

    def initialize(self, A, B):
        rows, cols = kd_orders(A, B)
        self.root = ns.nw_corner_tree(self.m, self.n, rows, cols, self.parent,
                                      self.flow)

    def optimize(self, A, B, eps=PRICING_EPS, max_iter=None):
        """Pivot to optimality for costs ``-<A_i, B_j>``; returns pivots."""
        if self.root < 0:
            self.initialize(A, B)
        if max_iter is None:
            max_iter = 50 * (self.m + self.n) * (self.m + self.n) + 10 ** 6
        ns.rebuild_tree(A, B, self.m, self.n, self.root, self.parent, self.pi,
                        self.depth, self.fch, self.nsib, self.psib, self.stack)
        it, status = ns.simplex_loop(A, B, self.m, self.n, self.root,
                                     self.parent, self.flow, self.pi,
                                     self.depth, self.fch, self.nsib,
                                     self.psib, self.stack, eps, max_iter,
                                     REFRESH)
        if status != 0:
            raise SolverStalled(f"network simplex stopped after {it} pivots")
        return it

    def coupling(self):
        m, n = self.m, self.n
        v = np.arange(m + n)
        keep = (v != self.root) & (self.flow > 0.5)
        v = v[keep]
        par = self.parent[keep]
        is_row = v < m
        rows = np.where(is_row, v, par)
        cols = np.where(is_row, par - m, v - m)
        mass = np.round(self.flow[keep]) / (m * n)
        order = np.lexsort((cols, rows))
        return Coupling(rows[order].astype(np.int64), cols[order].astype(np.int64),
                        mass[order], (m, n))


def _cost_scale(a, b):
    s = np.sqrt(np.mean(np.sum(a ** 2, axis=1)) * np.mean(np.sum(b ** 2, axis=1)))
    return s if s > 0 else 1.0


def solve_ot(a, b, max_iter=None):
    """Optimal coupling for the cost 0.5*|a_i - b_j|^2 between two clouds.

    Returns an :class:`OtSolution` whose objective is half the squared
    2-Wasserstein distance, together with Kantorovich potentials.
    """
    a = _as_points(a)
    b = _as_points(b)
    if a.shape[1] != b.shape[1]:
        raise DimensionError(f"clouds live in R^{a.shape[1]} and R^{b.shape[1]}")
    m, n = a.shape[0], b.shape[0]
    scale = _cost_scale(a, b)
    A = np.ascontiguousarray(a / scale)
    B = np.ascontiguousarray(b)
    tree = TransportTree(m, n)
    pivots = tree.optimize(A, B, max_iter=max_iter)
    plan = tree.coupling()
    diff = a[plan.rows] - b[plan.cols]
    objective = 0.5 * float(np.sum(plan.mass * np.sum(diff ** 2, axis=1)))
    dual_row = 0.5 * np.sum(a ** 2, axis=1) - scale * tree.pi[:m]
    dual_col = 0.5 * np.sum(b ** 2, axis=1) + scale * tree.pi[m:]
    shift = np.mean(dual_row)
    return OtSolution(plan, objective, dual_row - shift, dual_col + shift, pivots)


def wasserstein_product(a, b):
    """Largest mean inner product E<A, B> over couplings of the two clouds."""
    a = _as_points(a)
    b = _as_points(b)
    sol = solve_ot(a, b)
    return coupling_inner(sol.coupling, a, b)


def coupling_inner(plan, a, b):
    """sum_ij pi_ij <a_i, b_j> evaluated on the plan's support."""
    return float(np.sum(plan.mass * np.einsum("ij,ij->i", a[plan.rows], b[plan.cols])))


def w2_squared(a, b):
    """Squared 2-Wasserstein distance between the empirical measures."""
    return 2.0 * solve_ot(a, b).objective


def gelbrich_wip(Sigma, Gamma):
    """Wasserstein product of N(0, Sigma) and N(0, Gamma):
    trace of (Gamma^{1/2} Sigma Gamma^{1/2})^{1/2}."""
    Sigma = check_spd(Sigma, "Sigma")
    Gamma = check_spd(Gamma, "Gamma")
    if Sigma.shape != Gamma.shape:
        raise DimensionError(f"shapes {Sigma.shape} and {Gamma.shape} differ")
    R = psd_sqrt(Gamma)
    return float(np.trace(psd_sqrt(R @ Sigma @ R)))
