"""Covariate, noise and reference-distribution generators.

Every sampler takes an :class:`~mcqr.core_math.RngStream` (or a numpy
Generator) and is deterministic given it.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .core_math import RngStream, as_rng, cholesky, toeplitz_cov
from .dataset import RegressionDataset
from .errors import DimensionError, InvalidConfig

NOISE_KINDS = ("gaussian_iso", "multivariate_t", "pareto_copula", "banana",
               "contaminated_pareto", "contaminated_gaussian")
REFERENCE_KINDS = ("standard_gaussian", "uniform_cube", "spherical_uniform",
                   "uniform_interval")


@dataclass
class CovariateModel:
    """Gaussian covariates with Toeplitz covariance base**(-|i - j|)."""

    p: int
    base: float = 2.0
    kind: str = "gaussian_toeplitz"

    def __post_init__(self):
        if self.kind != "gaussian_toeplitz":
            raise InvalidConfig(f"unknown covariate model {self.kind!r}")
        if int(self.p) < 1:
            raise InvalidConfig("covariate dimension p must be >= 1")
        if self.base <= 1.0:
            raise InvalidConfig("Toeplitz base must exceed 1")
        self.p = int(self.p)

    @property
    def sigma(self):
        return toeplitz_cov(self.p, self.base)


@dataclass
class NoiseModel:
    """Noise law for the regression errors.

    ``params`` overrides the defaults of the chosen kind:

    - ``gaussian_iso``: ``scale`` (1.0)
    - ``multivariate_t``: ``df`` (2.0)
    - ``pareto_copula``: ``k, alpha, s`` (-2, 2, 1) and ``rho`` (0.9)
    - ``banana``: ``curvature_offset`` (None: exact centering), ``jitter`` (0.3)
    - ``contaminated_pareto``: ``epsilon``, inlier ``(k, alpha, s)`` =
      (-10/9, 10, 1), outlier ``(k2, alpha2, s2)`` = (10, 2, 10), ``rho``
    - ``contaminated_gaussian``: ``epsilon``, ``shift`` (100.0)
    """

    kind: str
    d: int
    params: dict = field(default_factory=dict)

    DEFAULTS = {
        "gaussian_iso": {"scale": 1.0},
        "multivariate_t": {"df": 2.0},
        "pareto_copula": {"k": -2.0, "alpha": 2.0, "s": 1.0, "rho": 0.9},
        "banana": {"curvature_offset": None, "jitter": 0.3},
        "contaminated_pareto": {"epsilon": 0.0, "k": -10.0 / 9.0, "alpha": 10.0,
                                "s": 1.0, "k2": 10.0, "alpha2": 2.0, "s2": 10.0,
                                "rho": 0.9},
        "contaminated_gaussian": {"epsilon": 0.0, "shift": 100.0},
    }

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise InvalidConfig(f"unknown noise kind {self.kind!r}")
        if int(self.d) < 1:
            raise InvalidConfig("noise dimension d must be >= 1")
        self.d = int(self.d)
        unknown = set(self.params) - set(self.DEFAULTS[self.kind])
        if unknown:
            raise InvalidConfig(f"unknown parameters for {self.kind}: {sorted(unknown)}")
        merged = dict(self.DEFAULTS[self.kind])
        merged.update(self.params)
        self.params = merged
        P = merged
        if self.kind == "multivariate_t" and not P["df"] > 0:
            raise InvalidConfig("degrees of freedom must be positive")
        for a, s in (("alpha", "s"), ("alpha2", "s2")):
            if a in P and not (P[a] > 0 and P[s] > 0):
                raise InvalidConfig("Pareto shape and scale must be positive")
        if "epsilon" in P and not 0.0 <= P["epsilon"] < 1.0:
            raise InvalidConfig("contamination fraction must lie in [0, 1)")
        if "rho" in P and not -1.0 < P["rho"] < 1.0:
            raise InvalidConfig("copula correlation base must lie in (-1, 1)")
        if self.kind == "banana" and self.d < 2:
            raise InvalidConfig("banana noise needs d >= 2")
        if self.kind == "gaussian_iso" and P["scale"] < 0:
            raise InvalidConfig("scale must be nonnegative")


@dataclass
class ReferenceModel:
    """Reference law P^U for the transport-based quantiles."""

    kind: str = "standard_gaussian"
    d: int = 1

    def __post_init__(self):
        if self.kind not in REFERENCE_KINDS:
            raise InvalidConfig(f"unknown reference kind {self.kind!r}")
        if int(self.d) < 1:
            raise InvalidConfig("reference dimension must be >= 1")
        self.d = int(self.d)
        if self.kind == "uniform_interval" and self.d != 1:
            raise InvalidConfig("uniform_interval is one-dimensional")


def _check_count(n, name="n"):
    if int(n) < 1:
        raise InvalidConfig(f"{name} must be >= 1")
    return int(n)


def sample_covariates(model, n, rng):
    """Rows i.i.d. N(0, Sigma) with the model's Toeplitz covariance."""
    n = _check_count(n)
    rng = as_rng(rng)
    L = cholesky(model.sigma)
    return rng.standard_normal((n, model.p)) @ L.T


def uniform_ball(n, d, rng):
    """Uniform points in the unit ball: Gaussian direction, radius U^(1/d)."""
    g = rng.standard_normal((n, d))
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    r = rng.random((n, 1)) ** (1.0 / d)
    return g / norms * r


def pareto_quantile(u, k, alpha, s):
    return k + s * (1.0 - u) ** (-1.0 / alpha)


def _pareto_copula(n, d, k, alpha, s, rho, rng):
    C = rho ** np.abs(np.subtract.outer(np.arange(d), np.arange(d))).astype(float)
    Z = rng.standard_normal((n, d)) @ cholesky(C).T
    # keep u strictly below 1 so the quantile stays finite
    u = np.minimum(ndtr(Z), 1.0 - np.finfo(float).eps)
    return pareto_quantile(u, k, alpha, s)


def sample_noise(model, n, rng):
    """Draw n error vectors from the noise model."""
    n = _check_count(n)
    rng = as_rng(rng)
    d = model.d
    P = model.params
    kind = model.kind
    if kind == "gaussian_iso":
        return P["scale"] * rng.standard_normal((n, d))
    if kind == "multivariate_t":
        z = rng.standard_normal((n, d))
        w = rng.chisquare(P["df"], size=(n, 1)) / P["df"]
        return z / np.sqrt(w)
    if kind == "pareto_copula":
        return _pareto_copula(n, d, P["k"], P["alpha"], P["s"], P["rho"], rng)
    if kind == "banana":
        head = uniform_ball(n, d - 1, rng)
        offset = P["curvature_offset"]
        if offset is None:
            offset = (d - 1) / (d + 1)  # E|B_{d-1}|^2
        tail = np.sum(head ** 2, axis=1, keepdims=True) - offset
        return np.hstack([head, tail]) + P["jitter"] * uniform_ball(n, d, rng)
    if kind == "contaminated_pareto":
        inl = _pareto_copula(n, d, P["k"], P["alpha"], P["s"], P["rho"], rng)
        out = _pareto_copula(n, d, P["k2"], P["alpha2"], P["s2"], P["rho"], rng)
        mask = rng.random(n) < P["epsilon"]
        return np.where(mask[:, None], out, inl)
    if kind == "contaminated_gaussian":
        z = rng.standard_normal((n, d))
        mask = rng.random(n) < P["epsilon"]
        return z + P["shift"] * mask[:, None]
    raise InvalidConfig(f"unknown noise kind {kind!r}")


def sample_reference(model, m, rng):
    """Draw m reference points."""
    m = _check_count(m, "m")
    rng = as_rng(rng)
    d = model.d
    if model.kind == "standard_gaussian":
        return rng.standard_normal((m, d))
    if model.kind == "uniform_cube":
        return rng.random((m, d))
    if model.kind == "uniform_interval":
        return rng.uniform(-1.0, 1.0, size=(m, 1))
    if model.kind == "spherical_uniform":
        g = rng.standard_normal((m, d))
        norms = np.linalg.norm(g, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        return g / norms * rng.random((m, 1))
    raise InvalidConfig(f"unknown reference kind {model.kind!r}")


def draw_b_star(d, p, rng, mean=5.0, var=5.0):
    """Coefficient matrix with i.i.d. N(mean, var) entries."""
    rng = as_rng(rng)
    return mean + np.sqrt(var) * rng.standard_normal((d, p))


def make_dataset(b_star, cov, noise, n, rng):
    """Y_i = b_star X_i + eps_i with X and eps drawn from independent substreams."""
    b_star = np.atleast_2d(np.asarray(b_star, dtype=float))
    if b_star.shape != (noise.d, cov.p):
        raise DimensionError(
            f"b_star is {b_star.shape}, models need {(noise.d, cov.p)}")
    rng = as_rng(rng)
    if isinstance(rng, RngStream):
        rx, re = rng.derive("covariates"), rng.derive("noise")
    else:
        rx = re = rng
    X = sample_covariates(cov, n, rx)
    eps = sample_noise(noise, n, re)
    return RegressionDataset(X, X @ b_star.T + eps)
