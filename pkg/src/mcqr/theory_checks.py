"""Numerical checks of the population identities behind MCQR and of its
empirical convergence trend."""

from dataclasses import dataclass

import numpy as np

from .core_math import as_rng, check_spd, mahalanobis_matrix_norm
from .errors import DimensionError, DomainError, InvalidConfig
from .ot_solver import gelbrich_wip, solve_ot

RESIDUAL_KINDS = ("uniform", "gaussian", "constant")


def _residuals(kind, n, rng, c):
    if kind == "uniform":
        return rng.random(n)
    if kind == "gaussian":
        return rng.standard_normal(n)
    if kind == "constant":
        return np.full(n, float(c))
    raise InvalidConfig(f"unknown residual kind {kind!r}")


def cqr_grid_loss(r, K=199):
    """min over monotone q of int_0^1 mean rho_tau(r - q(tau)) dtau.

    The integral is approximated on tau_k = k / (K + 1) with weight
    1 / (K + 1) each; the integrand vanishes at both ends so this is the
    trapezoid rule. The minimization separates over levels and is solved by
    empirical quantiles, which are monotone in tau.
    """
    r = np.asarray(r, dtype=float).ravel()
    taus = np.arange(1, K + 1) / (K + 1.0)
    q = np.quantile(r, taus, method="inverted_cdf")
    t = r[None, :] - q[:, None]
    loss = np.maximum(t, 0.0) + (taus[:, None] - 1.0) * t
    return float(loss.mean(axis=1).sum() / (K + 1))


def check_cqr_wip_identity(n, b, rng, kind="uniform", K=199, c=1.0):
    """Both sides of the CQR / Wasserstein-product identity in d = 1.

    Data are ``Y = b X + r`` with centered Gaussian ``X`` and residual law
    ``kind``. Returns ``(lhs, rhs)`` where lhs is the composite check loss at
    the true slope plus ``mean(Y) / 2`` and rhs is the empirical Wasserstein
    product of the residuals with ``n`` uniform [0, 1] draws.
    """
    rng = as_rng(rng)
    X = rng.standard_normal(n)
    X -= X.mean()
    r = _residuals(kind, n, rng, c)
    Y = b * X + r
    U = rng.random(n)
    lhs = cqr_grid_loss(Y - b * X, K) + 0.5 * float(np.mean(Y))
    sol = solve_ot(r[:, None], U[:, None])
    rhs = 0.5 * np.mean(r * r) + 0.5 * np.mean(U * U) - sol.objective
    return float(lhs), float(rhs)


def cqr_wip_population(kind, c=1.0):
    """Population value <<R, U[0,1]>> = int_0^1 F_R^{-1}(t) t dt."""
    if kind == "uniform":
        return 1.0 / 3.0
    if kind == "gaussian":
        # E[Z Phi(Z)] = E[phi(Z)] = 1 / (2 sqrt(pi))
        return 0.5 / np.sqrt(np.pi)
    if kind == "constant":
        return 0.5 * float(c)
    raise InvalidConfig(f"unknown residual kind {kind!r}")


def cqr_wip_identity_trials(n, reps, kind, rng, b=2.0, K=199):
    """Replicated identity check; returns arrays of lhs and rhs values."""
    rng = as_rng(rng)
    out = np.array([check_cqr_wip_identity(n, b, rng.derive("rep", i), kind, K)
                    for i in range(reps)])
    return out[:, 0], out[:, 1]


def lower_bound_curve(r, delta):
    """sqrt(r^2 + delta^2) - r."""
    if r < 0 or delta < 0:
        raise DomainError("r and delta must be non-negative")
    return float(np.hypot(r, delta) - r)


def population_gap(Sigma, delta_matrix, noise_cov):
    """Closed-form L(b) - L(b*) and the matching lower bound for Gaussian
    covariates and noise with a standard Gaussian reference."""
    Sigma = check_spd(Sigma, "Sigma")
    noise_cov = check_spd(noise_cov, "noise_cov")
    D = np.atleast_2d(np.asarray(delta_matrix, dtype=float))
    d, p = D.shape
    if Sigma.shape != (p, p) or noise_cov.shape != (d, d):
        raise DimensionError(
            f"delta is {D.shape}, Sigma {Sigma.shape}, noise_cov {noise_cov.shape}")
    eye = np.eye(d)
    r = gelbrich_wip(noise_cov, eye)
    S = D @ Sigma @ D.T
    gap = gelbrich_wip(0.5 * (S + S.T) + noise_cov, eye) - r
    return gap, lower_bound_curve(r, mahalanobis_matrix_norm(D, Sigma))


def verify_population_lower_bound(Sigma, delta_matrix, noise_cov, tol=1e-9):
    """True when L(b) - L(b*) >= sqrt(r^2 + |b* - b|_Sigma^2) - r - tol."""
    gap, bound = population_gap(Sigma, delta_matrix, noise_cov)
    return bool(gap >= bound - tol)


def _wip_parts(a, b):
    """Wasserstein product and its per-point linearization f(a_i), g(b_j)
    with wip = mean f + mean g."""
    sol = solve_ot(a, b)
    f = 0.5 * np.sum(a * a, axis=1) - sol.dual_row
    g = 0.5 * np.sum(b * b, axis=1) - sol.dual_col
    return float(f.mean() + g.mean()), f, g


def superadditivity_sampled_trial(Sigma, Gamma, n, rng, boot=200):
    """One sampled superadditivity check.

    Returns ``(excess, se)`` with ``excess = <<Z+e,U>>^2 - <<Z,U>>^2 -
    <<e,U>>^2`` on samples of size n and its bootstrap standard error.
    The bootstrap resamples points and re-averages the optimal dual
    potentials of each solve (the linearization of each product), so no
    transport problem is re-solved.
    """
    rng = as_rng(rng)
    Sigma = check_spd(Sigma, "Sigma")
    Gamma = check_spd(Gamma, "Gamma")
    d = Sigma.shape[0]
    Z = rng.multivariate_normal(np.zeros(d), Sigma, size=n)
    E = rng.multivariate_normal(np.zeros(d), Gamma, size=n)
    U = rng.standard_normal((n, d))
    w_s, f_s, g_s = _wip_parts(Z + E, U)
    w_z, f_z, g_z = _wip_parts(Z, U)
    w_e, f_e, g_e = _wip_parts(E, U)
    excess = w_s ** 2 - w_z ** 2 - w_e ** 2
    reps = np.empty(boot)
    for k in range(boot):
        i = rng.integers(0, n, n)
        j = rng.integers(0, n, n)
        s = f_s[i].mean() + g_s[j].mean()
        z = f_z[i].mean() + g_z[j].mean()
        e = f_e[i].mean() + g_e[j].mean()
        reps[k] = s * s - z * z - e * e
    return float(excess), float(np.std(reps, ddof=1))


@dataclass
class RateSweep:
    """Errors of one estimator over a grid of sample sizes.

    ``errors[i, r]`` is the loss at ``n_grid[i]`` in repetition ``r``.
    """

    n_grid: np.ndarray
    errors: np.ndarray
    d: int = None
    p: int = None
    noise: str = None
    reference: str = None

    def __post_init__(self):
        self.n_grid = np.asarray(self.n_grid, dtype=float).ravel()
        self.errors = np.atleast_2d(np.asarray(self.errors, dtype=float))
        if self.errors.shape[0] != self.n_grid.size:
            raise DimensionError("one row of errors is needed per grid point")
        if np.any(np.diff(self.n_grid) <= 0):
            raise InvalidConfig("n_grid must be strictly increasing")
        if self.errors.shape[1] < 1:
            raise InvalidConfig("at least one repetition is required")

    @property
    def reps(self):
        return self.errors.shape[1]

    def medians(self):
        return np.median(self.errors, axis=1)


def estimate_rate_slope(sweep, min_points=4, min_reps=20):
    """Least-squares slope of log(median error) against log(n), and its r^2."""
    if sweep.n_grid.size < min_points:
        raise InvalidConfig(f"need at least {min_points} grid points")
    if sweep.reps < min_reps:
        raise InvalidConfig(f"need at least {min_reps} repetitions per grid point")
    med = sweep.medians()
    if np.any(med <= 0):
        raise DomainError("median errors must be positive to take logs")
    x = np.log(sweep.n_grid)
    y = np.log(med)
    slope, intercept = np.polyfit(x, y, 1)
    ss_tot = np.sum((y - y.mean()) ** 2)
    ss_res = np.sum((y - slope * x - intercept) ** 2)
    r2 = 1.0 if ss_tot <= 1e-300 else 1.0 - ss_res / ss_tot
    return float(slope), float(r2)


def mcqr_rate_sweep(n_grid=(100, 200, 400, 800), reps=20, d=2, p=3,
                    noise="gaussian_iso", reference="standard_gaussian",
                    seed=0, jobs=1):
    """MCQR errors over ``n_grid`` through the benchmark runner."""
    from .bench import ExperimentConfig, run_experiment

    cfg = ExperimentConfig.from_dict({
        "name": "rate_sweep", "estimators": ["mcqr"], "d": d, "p": p,
        "noise": {"kind": noise}, "reference": {"kind": reference},
        "n_grid": list(n_grid), "reps": reps, "seed": seed})
    records = run_experiment(cfg, jobs=jobs)
    errors = np.full((len(n_grid), reps), np.nan)
    for rec in records:
        errors[list(n_grid).index(rec.n), rec.rep] = rec.error
    return RateSweep(n_grid, errors, d, p, noise, reference)
