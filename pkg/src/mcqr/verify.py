"""Executable check suite behind ``mcqr verify`` and the acceptance tests.

Each check returns a :class:`CheckResult` comparing a statistic with its
tolerance. Oracles are independent of the code under test: permutation
brute force for transport, the HiGHS LP for MCQR, closed forms for Gaussian
quantities and order statistics for quantiles.
"""

from dataclasses import asdict, dataclass
import itertools
import math
import time

import numpy as np

from .baselines import CqrConfig, fit_cqr_1d, fit_ols, fit_spqr
from .bench import ExperimentConfig, emit, run_experiment, summarize
from .core_math import RngStream, mahalanobis_matrix_norm
from .dataset import RegressionDataset
from .estimator import McqrConfig, fit_mcqr_lp, fit_mcqr_subgradient, mcqr_loss
from .ot_solver import gelbrich_wip, solve_ot, w2_squared, wasserstein_product
from .sampling import (CovariateModel, NoiseModel, ReferenceModel, draw_b_star,
                       make_dataset)
from .theory_checks import (cqr_wip_identity_trials, estimate_rate_slope,
                            superadditivity_sampled_trial, mcqr_rate_sweep,
                            verify_population_lower_bound)


@dataclass
class CheckResult:
    check_name: str
    passed: bool
    statistic: float
    tolerance: float
    detail: str = ""
    seconds: float = 0.0

    def to_json(self):
        out = asdict(self)
        out["pass"] = bool(out.pop("passed"))
        for key in ("statistic", "tolerance"):
            if isinstance(out[key], float) and not math.isfinite(out[key]):
                out[key] = None
        return out

    def line(self):
        flag = "PASS" if self.passed else "FAIL"
        return (f"[{flag}] {self.check_name}: statistic={self.statistic:.6g} "
                f"tolerance={self.tolerance:.6g} ({self.seconds:.1f}s) {self.detail}")


def _result(name, ok, stat, tol, detail, t0):
    return CheckResult(name, bool(ok), float(stat), float(tol), detail,
                       time.perf_counter() - t0)


def _random_spd(rng, d):
    A = rng.standard_normal((d, d))
    return A @ A.T + 0.1 * np.eye(d)


def brute_force_half_w2(a, b):
    """min over permutations of (1/n) sum 0.5 |a_i - b_s(i)|^2 for equal sizes."""
    n = a.shape[0]
    C = 0.5 * np.sum((a[:, None, :] - b[None, :, :]) ** 2, axis=2)
    rows = np.arange(n)
    return min(C[rows, list(s)].sum() for s in itertools.permutations(range(n))) / n


def check_ot_bruteforce(instances=200, seed=1):
    t0 = time.perf_counter()
    solve_ot(np.zeros((2, 1)), np.ones((2, 1)))  # load compiled kernels
    rng = RngStream(seed)
    worst = 0.0
    t1 = time.perf_counter()
    for _ in range(instances):
        n = int(rng.integers(1, 7))
        d = int(rng.integers(1, 5))
        a = rng.standard_normal((n, d))
        b = rng.standard_normal((n, d))
        worst = max(worst, abs(solve_ot(a, b).objective - brute_force_half_w2(a, b)))
    elapsed = time.perf_counter() - t1
    return _result("ot_exactness_vs_bruteforce", worst <= 1e-9 and elapsed < 5.0,
                   worst, 1e-9, f"{instances} instances in {elapsed:.2f}s (limit 5s)", t0)


def check_gelbrich_sampled(n=10_000, seed=2):
    t0 = time.perf_counter()
    rng = RngStream(seed)
    a = rng.standard_normal((n, 2)) * np.array([2.0, 1.0])
    b = rng.standard_normal((n, 2))
    exact = gelbrich_wip(np.diag([4.0, 1.0]), np.eye(2))
    rel = abs(wasserstein_product(a, b) - exact) / exact
    elapsed = time.perf_counter() - t0
    return _result("gelbrich_oracle_sampled", rel <= 0.05 and elapsed < 60.0, rel, 0.05,
                   f"closed form {exact:.6g}, {elapsed:.1f}s (limit 60s)", t0)


def check_superadditivity_closed_form(instances=100, seed=3):
    t0 = time.perf_counter()
    rng = RngStream(seed)
    worst = -np.inf
    for _ in range(instances):
        d = int(rng.integers(1, 6))
        S, G = _random_spd(rng, d), _random_spd(rng, d)
        eye = np.eye(d)
        lhs = gelbrich_wip(S + G, eye) ** 2
        rhs = gelbrich_wip(S, eye) ** 2 + gelbrich_wip(G, eye) ** 2
        worst = max(worst, rhs - lhs)
    eq = 0.0
    for _ in range(20):
        d = int(rng.integers(1, 6))
        s2, g2 = rng.uniform(0.1, 5.0, 2)
        eye = np.eye(d)
        lhs = gelbrich_wip((s2 + g2) * eye, eye) ** 2
        rhs = gelbrich_wip(s2 * eye, eye) ** 2 + gelbrich_wip(g2 * eye, eye) ** 2
        eq = max(eq, abs(lhs - rhs))
    stat = max(worst, eq)
    return _result("superadditivity_closed_form", worst <= 1e-9 and eq <= 1e-9, stat, 1e-9,
                   f"max violation {worst:.3g}, isotropic equality error {eq:.3g}", t0)


def check_product_perturbation_bound(instances=100, seed=4):
    t0 = time.perf_counter()
    rng = RngStream(seed)
    worst = -np.inf
    for _ in range(instances):
        d = int(rng.integers(1, 4))
        X1, X2, Y1, Y2 = (rng.standard_normal((int(rng.integers(1, 51)), d))
                          * rng.uniform(0.2, 3.0) + rng.normal(0, 1, d) for _ in range(4))
        lhs = abs(wasserstein_product(X1, X2) - wasserstein_product(Y1, Y2))
        rhs = (np.sqrt(np.mean(np.sum(Y2 ** 2, axis=1))) * np.sqrt(w2_squared(X1, Y1))
               + np.sqrt(np.mean(np.sum(X1 ** 2, axis=1))) * np.sqrt(w2_squared(X2, Y2)))
        worst = max(worst, lhs - rhs)
    return _result("product_perturbation_bound", worst <= 1e-7, worst, 1e-7,
                   f"{instances} four-cloud instances", t0)


def _duality_instances(count=20, seed=5):
    rng = RngStream(seed)
    out = []
    for k in range(count):
        n = int(rng.integers(10, 61))
        d = int(rng.integers(1, 4))
        p = int(rng.integers(1, 4))
        X = rng.standard_normal((n, p))
        X -= X.mean(axis=0)
        B = rng.normal(0, 2, (d, p))
        Y = X @ B.T + rng.standard_t(3, (n, d))
        U = rng.standard_normal((n, d))
        out.append((RegressionDataset(X, Y), U))
    return out


def check_mcqr_duality(seed=5):
    t0 = time.perf_counter()
    gap = feas = ref = 0.0
    for data, U in _duality_instances(seed=seed):
        fit = fit_mcqr_lp(data, reference_points=U)
        loss = mcqr_loss(data, fit.b_hat, U)
        gap = max(gap, abs(loss - fit.lp_value) / max(1.0, abs(fit.lp_value)))
        feas = max(feas, fit.info["feasibility_inf"])
        hi = fit_mcqr_lp(data, McqrConfig(backend="highs"), reference_points=U)
        ref = max(ref, abs(hi.lp_value - fit.lp_value) / max(1.0, abs(hi.lp_value)))
    ok = gap <= 1e-6 and feas <= 1e-7 and ref <= 1e-6
    return _result("mcqr_lp_duality", ok, gap, 1e-6,
                   f"max |U'piX| {feas:.3g} (tol 1e-7), HiGHS value gap {ref:.3g}", t0)


def check_solver_agreement(seed=5, max_iters=5000):
    t0 = time.perf_counter()
    worst = 0.0
    for data, U in _duality_instances(seed=seed):
        lp = fit_mcqr_lp(data, reference_points=U)
        sg = fit_mcqr_subgradient(data, McqrConfig(solver="subgradient", max_iters=max_iters),
                                  reference_points=U)
        worst = max(worst, abs(sg.objective - lp.objective) / max(1e-12, abs(lp.objective)))
    return _result("subgradient_vs_lp_objective", worst <= 1e-3, worst, 1e-3,
                   f"{max_iters} subgradient steps", t0)


def check_subgradient_fd(points=20, seed=7, h=1e-5):
    t0 = time.perf_counter()
    rng = RngStream(seed)
    n, d, p = 30, 2, 2
    X = rng.standard_normal((n, p))
    X -= X.mean(axis=0)
    data = RegressionDataset(X, X @ rng.normal(0, 1, (d, p)).T + rng.standard_normal((n, d)))
    U = rng.standard_normal((n, d))
    worst = 0.0
    used = skipped = 0
    while used < points and skipped < 10 * points:
        b = rng.normal(0, 2, (d, p))
        R = data.residuals(b)
        G = -solve_ot(R, U).coupling.apply(X, U).T
        fd = np.empty((d, p))
        kink = False
        for k in range(d):
            for l in range(p):
                e = np.zeros((d, p))
                e[k, l] = h
                f0 = mcqr_loss(data, b, U)
                fp = mcqr_loss(data, b + e, U)
                fm = mcqr_loss(data, b - e, U)
                # one-sided slopes differ where the optimal coupling is not unique
                if abs((fp - f0) - (f0 - fm)) / h > 1e-6:
                    kink = True
                fd[k, l] = (fp - fm) / (2 * h)
        if kink:
            skipped += 1
            continue
        used += 1
        worst = max(worst, float(np.max(np.abs(fd - G))))
    return _result("subgradient_vs_finite_difference", used == points and worst <= 1e-3,
                   worst, 1e-3, f"{used} points used, {skipped} kinks skipped", t0)


def check_near_noiseless(seed=8):
    t0 = time.perf_counter()
    rng = RngStream(seed)
    cov = CovariateModel(2)
    b_star = draw_b_star(2, 2, rng.derive("b"))
    X = rng.derive("x").multivariate_normal(np.zeros(2), cov.sigma, 200)
    data = RegressionDataset(X, X @ b_star.T + 1e-6 * rng.derive("e").standard_normal((200, 2)))
    fit = fit_mcqr_lp(data, McqrConfig(reference=ReferenceModel("standard_gaussian", 2)),
                      rng=rng.derive("u"))
    err = mahalanobis_matrix_norm(fit.b_hat - b_star, cov.sigma)
    return _result("near_noiseless_recovery", err <= 0.05, err, 0.05, "n = m = 200", t0)


def check_consistency_trend(seed=9, jobs=1):
    t0 = time.perf_counter()
    sweep = mcqr_rate_sweep((100, 200, 400, 800), 20, 2, 3, seed=seed, jobs=jobs)
    med = sweep.medians()
    slope, r2 = estimate_rate_slope(sweep)
    elapsed = time.perf_counter() - t0
    ok = bool(np.all(np.diff(med) < 0)) and slope < -0.1 and r2 >= 0.8 and elapsed < 600
    return _result("mcqr_consistency_trend", ok, slope, -0.1,
                   f"medians {np.round(med, 4).tolist()}, r2 {r2:.3f}, {elapsed:.0f}s", t0)


def _median_errors(doc, jobs):
    rows = summarize(run_experiment(ExperimentConfig.from_dict(doc), jobs=jobs))
    return {r["estimator"]: r["median_error"] for r in rows}


def check_robustness_ordering(seed=10, jobs=1, reps=50):
    t0 = time.perf_counter()
    ratios = []
    for k, noise in enumerate(("multivariate_t", "pareto_copula")):
        med = _median_errors({"estimators": ["mcqr", "ols"], "noise": {"kind": noise},
                              "d": 2, "p": 7, "n_grid": [400], "reps": reps,
                              "seed": seed + k}, jobs)
        ratios.append(med["mcqr"] / med["ols"])
    return _result("heavy_tail_ordering_mcqr_vs_ls", max(ratios) < 1.0, max(ratios), 1.0,
                   f"median error ratios t2 {ratios[0]:.3f}, pareto {ratios[1]:.3f}", t0)


def check_contamination_ordering(seed=11, jobs=1, reps=50):
    t0 = time.perf_counter()
    med = _median_errors({"estimators": ["mcqr", "coorcqr"],
                          "noise": {"kind": "contaminated_gaussian"}, "d": 1, "p": 7,
                          "n": 200, "epsilon_grid": [0.3], "reps": reps, "seed": seed}, jobs)
    ratio = med["mcqr"] / med["coorcqr"]
    return _result("contamination_ordering_mcqr_vs_coorcqr", ratio < 1.0, ratio, 1.0,
                   f"medians mcqr {med['mcqr']:.4g}, coorcqr {med['coorcqr']:.4g}", t0)


def check_cqr_identity(n=10_000, reps=20, seed=12):
    t0 = time.perf_counter()
    worst = 0.0
    parts = []
    for kind in ("uniform", "gaussian"):
        lhs, rhs = cqr_wip_identity_trials(n, reps, kind, RngStream(seed).derive(kind))
        diff = lhs - rhs
        se = np.std(diff, ddof=1) / np.sqrt(reps)
        z = abs(diff.mean()) / se
        worst = max(worst, z)
        parts.append(f"{kind}: lhs {lhs.mean():.5f} rhs {rhs.mean():.5f} se {se:.2g}")
    return _result("cqr_wasserstein_product_identity", worst <= 5.0, worst, 5.0,
                   "; ".join(parts), t0)


def check_reference_invariance(seed=13):
    t0 = time.perf_counter()
    rng = RngStream(seed)
    cov = CovariateModel(3)
    b_star = draw_b_star(2, 3, rng.derive("b"))
    data = make_dataset(b_star, cov, NoiseModel("gaussian_iso", 2), 400, rng.derive("data"))
    fits = [fit_mcqr_lp(data, McqrConfig(reference=ReferenceModel(kind, 2)),
                        rng=rng.derive("ref", kind))
            for kind in ("standard_gaussian", "uniform_cube")]
    diff = mahalanobis_matrix_norm(fits[0].b_hat - fits[1].b_hat, cov.sigma)
    return _result("reference_invariance", diff <= 0.2, diff, 0.2, "n = m = 400, d = 2, p = 3", t0)


def check_baseline_oracles(seed=14):
    t0 = time.perf_counter()
    rng = RngStream(seed)
    # CQR without covariates: the tau-quantile minimizer is the ceil(n tau)-th order statistic
    y = rng.standard_normal(203)
    _, q = fit_cqr_1d(np.zeros((203, 0)), y, CqrConfig(19))
    ys = np.sort(y)
    taus = np.arange(1, 20) / 20.0
    cqr_err = float(np.max(np.abs(q - ys[np.ceil(203 * taus).astype(int) - 1])))
    # geometric median on a fine grid over [-1, 6]^2
    pts = np.array([[0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [5.0, 5.0]])
    g = np.linspace(-1.0, 6.0, 701)
    gx, gy = np.meshgrid(g, g, indexing="ij")
    obj = sum(np.hypot(gx - a, gy - b) for a, b in pts)
    k = np.unravel_index(np.argmin(obj), obj.shape)
    grid_min = np.array([gx[k], gy[k]])
    med = fit_spqr(RegressionDataset(np.zeros((4, 0)), pts)).intercept
    spqr_err = float(np.max(np.abs(med - grid_min)))
    step = g[1] - g[0]
    # least squares on noiseless data
    X = rng.standard_normal((50, 4))
    B = rng.standard_normal((3, 4))
    ols_err = float(np.max(np.abs(fit_ols(RegressionDataset(X, X @ B.T)).b - B)))
    ok = cqr_err <= 1e-6 and spqr_err <= step and ols_err <= 1e-10
    stat = max(cqr_err / 1e-6, spqr_err / step, ols_err / 1e-10)
    return _result("baseline_oracles", ok, stat, 1.0,
                   f"cqr {cqr_err:.2g} (1e-6), spqr {spqr_err:.2g} (grid {step:.2g}), "
                   f"ols {ols_err:.2g} (1e-10)", t0)


def check_determinism(tmpdir, config=None, seed=15):
    """Rerun a benchmark config with 1, 2 and again 1 workers and compare bytes.

    ``config`` is a path to a JSON config; a small built-in experiment is used
    when omitted.
    """
    import filecmp
    import os

    t0 = time.perf_counter()
    if config is None:
        cfg = ExperimentConfig.from_dict({"estimators": ["mcqr", "ols", "coorcqr", "spqr"],
                                          "d": 2, "p": 3, "n_grid": [40, 60], "reps": 3,
                                          "seed": seed})
    else:
        cfg = ExperimentConfig.from_json(config)
    paths = []
    for k, jobs in enumerate((1, 2, 1)):
        path = os.path.join(tmpdir, f"determinism_{k}.csv")
        emit(run_experiment(cfg, jobs=jobs), path)
        paths.append(path)
    same = all(filecmp.cmp(paths[0], p, shallow=False) for p in paths[1:])
    return _result("benchmark_determinism", same, 0.0 if same else 1.0, 0.0,
                   f"{cfg.name}: jobs 1, 2 and 1 again", t0)


def check_population_lower_bound(instances=100, seed=16):
    t0 = time.perf_counter()
    rng = RngStream(seed)
    bad = 0
    for _ in range(instances):
        d = int(rng.integers(1, 6))
        p = int(rng.integers(1, 6))
        ok = verify_population_lower_bound(_random_spd(rng, p), rng.normal(0, 2, (d, p)),
                                           _random_spd(rng, d))
        bad += not ok
    return _result("population_lower_bound", bad == 0, bad, 0, f"{instances} instances", t0)


def check_superadditivity_sampled(trials=40, n=5000, d=2, seed=17):
    t0 = time.perf_counter()
    rng = RngStream(seed)
    hits = 0
    for k in range(trials):
        S, G = _random_spd(rng, d), _random_spd(rng, d)
        excess, se = superadditivity_sampled_trial(S, G, n, rng.derive("trial", k))
        hits += excess >= -3.0 * se
    frac = hits / trials
    return _result("superadditivity_sampled", frac >= 0.95, frac, 0.95,
                   f"{trials} trials, n = m = {n}, d = {d}", t0)


FAST = ("ot_bruteforce", "superadditivity_closed_form", "product_perturbation_bound", "mcqr_duality",
        "subgradient_fd", "near_noiseless", "reference_invariance", "baseline_oracles",
        "determinism", "population_lower_bound")
SLOW = ("gelbrich_sampled", "solver_agreement", "consistency_trend", "robustness_ordering",
        "contamination_ordering", "cqr_identity", "superadditivity_sampled")


def run_suite(suite="fast", tmpdir=None, jobs=1, log=None):
    """Run the named suite and return a list of results."""
    import tempfile

    names = FAST if suite == "fast" else FAST + SLOW
    results = []
    with tempfile.TemporaryDirectory() as tmp:
        for name in names:
            fn = globals()[f"check_{name}"]
            if name == "determinism":
                res = fn(tmpdir or tmp)
            elif name in ("consistency_trend", "robustness_ordering", "contamination_ordering"):
                res = fn(jobs=jobs)
            else:
                res = fn()
            results.append(res)
            if log is not None:
                log(res.line())
    return results

