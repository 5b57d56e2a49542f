"""Command line entry point: ``mcqr {bench,estimate,ot,verify}``."""

import argparse
import json
import logging
import sys

import numpy as np

from .errors import IoError, McqrError

log = logging.getLogger("mcqr")


def _read_csv(path):
    try:
        return np.loadtxt(path, delimiter=",", ndmin=2)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except ValueError:
        # tolerate a single header row
        try:
            return np.loadtxt(path, delimiter=",", ndmin=2, skiprows=1)
        except ValueError as exc:
            raise IoError(f"{path} is not a numeric CSV: {exc}") from exc


def _jobs(value):
    from .bench import default_jobs
    return default_jobs() if value is None else value


def cmd_bench(args):
    from .bench import ExperimentConfig, emit, run_experiment, summarize

    cfg = ExperimentConfig.from_json(args.config)
    if args.reps is not None:
        cfg.reps = args.reps
    records = run_experiment(cfg, jobs=_jobs(args.jobs), seed=args.seed)
    out = args.output or cfg.output or f"{cfg.name}.csv"
    emit(records, out, "json" if out.endswith(".json") else "csv")
    print(json.dumps({"output": out, "records": len(records),
                      "summary": summarize(records) if records else []}, indent=1))
    return 0


def cmd_estimate(args):
    from .baselines import fit_coorcqr, fit_ols, fit_spqr
    from .core_math import RngStream
    from .dataset import RegressionDataset
    from .estimator import McqrConfig, fit_mcqr
    from .sampling import ReferenceModel

    data = RegressionDataset(_read_csv(args.x), _read_csv(args.y))
    diag = {"method": args.method, "n": data.n, "p": data.p, "d": data.d}
    if args.method == "mcqr":
        cfg = McqrConfig(reference=ReferenceModel(args.reference, data.d), m=args.m,
                         solver=args.solver)
        fit = fit_mcqr(data, cfg, rng=RngStream(args.seed))
        b = fit.b_hat
        diag.update(objective=fit.objective, grad_residual=fit.grad_residual,
                    iterations=fit.iterations, solver=fit.solver_used,
                    converged=fit.converged, runtime_ms=fit.runtime_ms)
    else:
        fit = {"ols": fit_ols, "coorcqr": fit_coorcqr, "spqr": fit_spqr}[args.method](data)
        b = fit.b
        diag.update(converged=fit.converged, iterations=fit.iterations)
        if fit.intercept is not None:
            diag["intercept"] = np.asarray(fit.intercept).tolist()
    try:
        np.savetxt(args.out, b, delimiter=",", fmt="%.12g")
    except OSError as exc:
        raise IoError(f"cannot write {args.out}: {exc}") from exc
    diag["b_hat_path"] = args.out
    print(json.dumps(diag, indent=1))
    return 0


def cmd_ot(args):
    from .ot_solver import solve_ot

    a, b = _read_csv(args.a), _read_csv(args.b)
    sol = solve_ot(a, b)
    wip = (0.5 * np.mean(np.sum(a * a, axis=1)) + 0.5 * np.mean(np.sum(b * b, axis=1))
           - sol.objective)
    print(json.dumps({"objective": sol.objective, "w2_squared": 2.0 * sol.objective,
                      "wasserstein_product": float(wip), "duality_gap": sol.duality_gap,
                      "support": sol.coupling.nnz}, indent=1))
    return 0


def cmd_verify(args):
    from .verify import run_suite

    results = run_suite(args.suite, jobs=_jobs(args.jobs),
                        log=lambda line: print(line, file=sys.stderr))
    report = [r.to_json() for r in results]
    text = json.dumps(report, indent=1)
    if args.output:
        try:
            with open(args.output, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
        except OSError as exc:
            raise IoError(f"cannot write {args.output}: {exc}") from exc
    print(text)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="mcqr", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bench", help="run a Monte Carlo experiment from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--jobs", type=int, help="worker processes (default: $MCQR_JOBS or 1)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--reps", type=int, help="override the number of repetitions")
    p.add_argument("--output", help="CSV or JSON path (default: config output or <name>.csv)")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("estimate", help="fit a regression from CSV files")
    p.add_argument("--x", required=True, help="covariates, one row per unit")
    p.add_argument("--y", required=True, help="responses, one row per unit")
    p.add_argument("--method", choices=("mcqr", "ols", "coorcqr", "spqr"), default="mcqr")
    p.add_argument("--reference", default="standard_gaussian")
    p.add_argument("--m", type=int, help="reference sample size (default n)")
    p.add_argument("--solver", choices=("exact_lp", "subgradient"), default="exact_lp")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="b_hat.csv", help="where to write the coefficients")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("ot", help="exact transport between two CSV point clouds")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.set_defaults(func=cmd_ot)

    p = sub.add_parser("verify", help="run the numerical check suite")
    p.add_argument("--suite", choices=("fast", "all"), default="fast")
    p.add_argument("--jobs", type=int)
    p.add_argument("--output", help="also write the JSON report here")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except McqrError as exc:
        log.error("%s", exc)
        return 2 if isinstance(exc, (IoError, ValueError)) else 1


if __name__ == "__main__":
    sys.exit(main())
