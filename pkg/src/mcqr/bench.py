"""Monte Carlo benchmark runner for MCQR and its comparators.

An experiment is a JSON document describing the data-generating process, a
sweep axis (sample sizes or contamination fractions) and the estimators to
compare. Every (sweep point, repetition) cell draws its data from a stream
derived from ``(seed, "data", sweep index, rep)`` and every estimator draws
its own randomness from ``(seed, estimator, sweep index, rep)``, so results
do not depend on how cells are scheduled over workers.
"""

from concurrent.futures import ProcessPoolExecutor
import csv
from dataclasses import asdict, dataclass, field
import json
import math
import os
import time

import numpy as np

from .baselines import CqrConfig, fit_coorcqr, fit_ols, fit_spqr
from .core_math import RngStream, mahalanobis_matrix_norm, stable_key
from .errors import EmptyInput, InvalidConfig, IoError, McqrError
from .estimator import McqrConfig, fit_mcqr
from .sampling import (NOISE_KINDS, CovariateModel, NoiseModel, ReferenceModel,
                       draw_b_star, make_dataset)

ESTIMATORS = ("mcqr", "ols", "coorcqr", "spqr")
CSV_FIELDS = ("estimator", "noise", "n", "p", "d", "epsilon", "rep", "seed",
              "error", "log_error", "runtime_ms", "converged")
JOBS_ENV = "MCQR_JOBS"


def default_jobs():
    """Worker count from ``MCQR_JOBS``, else 1."""
    try:
        return max(1, int(os.environ.get(JOBS_ENV, "1")))
    except ValueError:
        return 1


@dataclass
class ExperimentConfig:
    """One benchmark experiment.

    ``dims`` lists the (d, p) pairs to run; exactly one of ``n_grid`` and
    ``epsilon_grid`` is the sweep axis, the latter at fixed sample size ``n``.
    ``m`` is ``"=n"`` or a fixed reference size. Runtimes are written only
    when ``record_runtime`` is set, since wall-clock times would break
    byte-identical reruns.
    """

    name: str = "experiment"
    estimators: list = field(default_factory=lambda: list(ESTIMATORS))
    noise: str = "gaussian_iso"
    noise_params: dict = field(default_factory=dict)
    covariate_base: float = 2.0
    dims: list = field(default_factory=lambda: [(2, 7)])
    n_grid: list = None
    epsilon_grid: list = None
    n: int = 200
    reps: int = 100
    m: object = "=n"
    reference: str = "standard_gaussian"
    solver: str = "exact_lp"
    cqr_levels: int = 19
    seed: int = 0
    output: str = None
    record_runtime: bool = False

    def __post_init__(self):
        self.estimators = list(self.estimators)
        bad = [e for e in self.estimators if e not in ESTIMATORS]
        if bad or not self.estimators:
            raise InvalidConfig(f"estimators must be a non-empty subset of {ESTIMATORS}")
        if self.noise not in NOISE_KINDS:
            raise InvalidConfig(f"unknown noise kind {self.noise!r}")
        if (self.n_grid is None) == (self.epsilon_grid is None):
            raise InvalidConfig("give exactly one of n_grid and epsilon_grid")
        if int(self.reps) < 1:
            raise InvalidConfig("reps must be >= 1")
        self.reps = int(self.reps)
        self.dims = [(int(d), int(p)) for d, p in self.dims]
        if not self.dims:
            raise InvalidConfig("dims must not be empty")
        if self.n_grid is not None:
            self.n_grid = [int(v) for v in self.n_grid]
            if not self.n_grid or min(self.n_grid) < 2:
                raise InvalidConfig("n_grid must hold sample sizes >= 2")
        else:
            self.epsilon_grid = [float(v) for v in self.epsilon_grid]
            if not self.epsilon_grid:
                raise InvalidConfig("epsilon_grid must not be empty")
            if "epsilon" not in NoiseModel.DEFAULTS[self.noise]:
                raise InvalidConfig(f"noise {self.noise!r} has no contamination fraction")
        if self.m != "=n" and int(self.m) < 1:
            raise InvalidConfig('m must be "=n" or a positive count')
        # validate the models once up front
        for d, p in self.dims:
            self.noise_model(d, self.epsilon_grid[0] if self.epsilon_grid else None)
            ReferenceModel(self.reference, d)
            CovariateModel(p, self.covariate_base)
        McqrConfig(solver=self.solver)
        CqrConfig(self.cqr_levels)

    @classmethod
    def from_dict(cls, doc):
        doc = dict(doc)
        known = {f for f in cls.__dataclass_fields__}
        # accept nested {"noise": {"kind": ..., "params": ...}} and single (d, p)
        if isinstance(doc.get("noise"), dict):
            nz = doc.pop("noise")
            doc["noise"] = nz.get("kind", "gaussian_iso")
            doc["noise_params"] = nz.get("params", {})
        if isinstance(doc.get("reference"), dict):
            doc["reference"] = doc["reference"].get("kind", "standard_gaussian")
        if isinstance(doc.get("covariates"), dict):
            doc["covariate_base"] = doc.pop("covariates").get("base", 2.0)
        if "d" in doc or "p" in doc:
            doc["dims"] = [(doc.pop("d", 2), doc.pop("p", 7))]
        unknown = set(doc) - known
        if unknown:
            raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def from_json(cls, path):
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise IoError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise InvalidConfig(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(doc)

    def noise_model(self, d, epsilon=None):
        params = dict(self.noise_params)
        if epsilon is not None:
            params["epsilon"] = epsilon
        return NoiseModel(self.noise, d, params)

    def points(self):
        """Sweep points as (index, d, p, n, epsilon) tuples."""
        out = []
        for d, p in self.dims:
            if self.n_grid is not None:
                out += [(d, p, n, None) for n in self.n_grid]
            else:
                out += [(d, p, self.n, eps) for eps in self.epsilon_grid]
        return [(i,) + pt for i, pt in enumerate(out)]


@dataclass
class ResultRecord:
    estimator: str
    noise: str
    n: int
    p: int
    d: int
    epsilon: float
    rep: int
    seed: int
    error: float
    log_error: float
    runtime_ms: float
    converged: bool


def cell_seed(seed, *keys):
    """64-bit seed derived from ``seed`` and the cell keys."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(stable_key(k) for k in keys))
    return int(ss.generate_state(1, np.uint64)[0])


def _fit(name, data, cfg, d, n, rng):
    if name == "mcqr":
        m = n if cfg.m == "=n" else int(cfg.m)
        fit = fit_mcqr(data, McqrConfig(reference=ReferenceModel(cfg.reference, d),
                                        m=m, solver=cfg.solver), rng=rng)
        return fit.b_hat, fit.converged
    if name == "ols":
        return fit_ols(data).b, True
    if name == "coorcqr":
        return fit_coorcqr(data, CqrConfig(cfg.cqr_levels)).b, True
    fit = fit_spqr(data)
    return fit.b, fit.converged


def _run_cell(cfg, point, rep):
    idx, d, p, n, eps = point
    cov = CovariateModel(p, cfg.covariate_base)
    b_star = draw_b_star(d, p, RngStream(cfg.seed).derive("b_star", d, p))
    data = make_dataset(b_star, cov, cfg.noise_model(d, eps), n,
                        RngStream(cfg.seed).derive("data", idx, rep))
    sigma = cov.sigma
    out = []
    for name in cfg.estimators:
        s = cell_seed(cfg.seed, name, idx, rep)
        t0 = time.perf_counter()
        try:
            b_hat, ok = _fit(name, data, cfg, d, n, RngStream(s))
            err = mahalanobis_matrix_norm(b_hat - b_star, sigma)
        except (McqrError, ArithmeticError, ValueError, RuntimeError, np.linalg.LinAlgError):
            err, ok = math.nan, False
        ms = 1000.0 * (time.perf_counter() - t0) if cfg.record_runtime else None
        log_err = math.log(err) if err > 0 else (-math.inf if err == 0 else math.nan)
        out.append(ResultRecord(name, cfg.noise, n, p, d, eps, rep, s, float(err),
                                log_err, ms, bool(ok)))
    return out


def _run_cell_args(args):
    return _run_cell(*args)


def run_experiment(config, jobs=None, seed=None):
    """Run every (sweep point, rep) cell; records sorted by
    (estimator, sweep index, rep)."""
    if seed is not None:
        config = ExperimentConfig(**{**asdict(config), "seed": int(seed)})
    jobs = default_jobs() if jobs is None else max(1, int(jobs))
    tasks = [(config, pt, r) for pt in config.points() for r in range(config.reps)]
    if jobs == 1 or len(tasks) == 1:
        results = [_run_cell(*t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_cell_args, tasks, chunksize=1))
    order = {name: k for k, name in enumerate(config.estimators)}
    index = {(pt[1], pt[2], pt[3], pt[4]): pt[0] for pt in config.points()}
    records = [rec for cell in results for rec in cell]
    records.sort(key=lambda r: (order[r.estimator], index[(r.d, r.p, r.n, r.epsilon)], r.rep))
    return records


def summarize(records):
    """Aggregate converged rows per (estimator, d, p, n, epsilon)."""
    if not records:
        raise EmptyInput("no records to summarize")
    groups = {}
    for r in records:
        groups.setdefault((r.estimator, r.d, r.p, r.n, r.epsilon), []).append(r)
    out = []
    for (est, d, p, n, eps), rows in groups.items():
        errs = np.array([r.error for r in rows if r.converged and math.isfinite(r.error)])
        row = {"estimator": est, "d": d, "p": p, "n": n, "epsilon": eps,
               "count": int(errs.size), "failed": len(rows) - int(errs.size)}
        if errs.size:
            q1, med, q3 = np.percentile(errs, [25, 50, 75])
            with np.errstate(divide="ignore"):
                row.update(mean_log_error=float(np.mean(np.log(errs))),
                           median_error=float(med), iqr=float(q3 - q1))
        else:
            row.update(mean_log_error=math.nan, median_error=math.nan, iqr=math.nan)
        out.append(row)
    return out


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".12g")


def emit(records, path, fmt="csv"):
    """Write records as CSV (fixed header, 12 significant digits) or JSON."""
    if fmt not in ("csv", "json"):
        raise InvalidConfig(f"unknown format {fmt!r}")
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            if fmt == "csv":
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(CSV_FIELDS)
                for r in records:
                    w.writerow([_fmt(getattr(r, f)) for f in CSV_FIELDS])
            else:
                rows = [{f: (None if isinstance(v, float) and not math.isfinite(v) else v)
                         for f, v in asdict(r).items()} for r in records]
                json.dump(rows, fh, indent=1)
                fh.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _parse_float(s):
    return None if s == "" else float(s)


def load_records(path):
    """Read a CSV written by :func:`emit`."""
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    return [ResultRecord(r["estimator"], r["noise"], int(r["n"]), int(r["p"]), int(r["d"]),
                         _parse_float(r["epsilon"]), int(r["rep"]), int(r["seed"]),
                         float(r["error"]), float(r["log_error"]),
                         _parse_float(r["runtime_ms"]), r["converged"] == "true")
            for r in rows]
