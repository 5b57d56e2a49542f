import csv
import filecmp
import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from mcqr import cli
from mcqr.bench import (CSV_FIELDS, ExperimentConfig, ResultRecord, cell_seed, emit,
                        load_records, run_experiment, summarize)
from mcqr.errors import EmptyInput, InvalidConfig, IoError

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def _rec(est="mcqr", n=100, rep=0, error=0.5, converged=True, eps=None):
    return ResultRecord(est, "gaussian_iso", n, 7, 2, eps, rep, 123, error,
                        math.log(error) if error > 0 else -math.inf, None, converged)


def test_ols_noiseless_surrogate():
    cfg = ExperimentConfig.from_dict({"estimators": ["ols"], "d": 2, "p": 3,
                                      "noise": {"kind": "gaussian_iso", "params": {"scale": 0.0}},
                                      "n_grid": [50], "reps": 1, "seed": 3})
    (rec,) = run_experiment(cfg)
    assert rec.error <= 1e-8 and rec.converged


def test_same_seed_same_csv(tmp_path):
    cfg = ExperimentConfig.from_dict({"estimators": ["mcqr", "ols", "spqr"], "d": 2, "p": 2,
                                      "n_grid": [30, 40], "reps": 2, "seed": 9})
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    emit(run_experiment(cfg, jobs=1), a)
    emit(run_experiment(cfg, jobs=2), b)
    assert filecmp.cmp(a, b, shallow=False)
    c = tmp_path / "c.csv"
    emit(run_experiment(cfg, jobs=1, seed=10), c)
    assert not filecmp.cmp(a, c, shallow=False)


def test_epsilon_sweep_records():
    cfg = ExperimentConfig.from_dict({"estimators": ["ols"], "d": 1, "p": 2, "n": 30,
                                      "noise": {"kind": "contaminated_gaussian"},
                                      "epsilon_grid": [0.1, 0.2], "reps": 2})
    recs = run_experiment(cfg)
    assert [r.epsilon for r in recs] == [0.1, 0.1, 0.2, 0.2]
    assert all(r.n == 30 for r in recs)


def test_records_sorted_and_seeds_distinct():
    cfg = ExperimentConfig.from_dict({"estimators": ["ols", "spqr"], "d": 2, "p": 2,
                                      "n_grid": [20, 30], "reps": 3})
    recs = run_experiment(cfg)
    assert [r.estimator for r in recs] == ["ols"] * 6 + ["spqr"] * 6
    assert [(r.n, r.rep) for r in recs[:6]] == [(20, 0), (20, 1), (20, 2),
                                                 (30, 0), (30, 1), (30, 2)]
    assert len({r.seed for r in recs}) == len(recs)
    assert cell_seed(0, "ols", 0, 1) == recs[1].seed


def test_failure_is_recorded_not_raised():
    # p > n makes least squares rank deficient
    cfg = ExperimentConfig.from_dict({"estimators": ["ols"], "d": 1, "p": 7,
                                      "noise": {"kind": "gaussian_iso"},
                                      "n_grid": [5], "reps": 1})
    (rec,) = run_experiment(cfg)
    assert not rec.converged and math.isnan(rec.error)


@pytest.mark.parametrize("doc", [
    {"estimators": ["lasso"], "n_grid": [10]},
    {"n_grid": [10], "epsilon_grid": [0.1], "noise": {"kind": "contaminated_gaussian"}},
    {},
    {"n_grid": [10], "reps": 0},
    {"epsilon_grid": [0.1]},
    {"n_grid": [10], "colour": "red"},
])
def test_invalid_configs(doc):
    with pytest.raises(InvalidConfig):
        ExperimentConfig.from_dict(doc)


def test_all_figure_configs_load():
    names = ["fig1a", "fig1b", "fig1c", "fig1d", "fig2a", "fig2b"]
    for name in names:
        cfg = ExperimentConfig.from_json(os.path.join(ROOT, "configs", f"{name}.json"))
        assert cfg.reps == 100
        if name.startswith("fig1"):
            assert cfg.n_grid == [100, 200, 300, 400, 500, 600]
            assert cfg.dims == [(2, 7), (4, 10)]
        else:
            assert cfg.n == 200 and cfg.epsilon_grid[0] == 0.05 and cfg.epsilon_grid[-1] == 0.5


def test_summarize_single_and_known():
    (row,) = summarize([_rec(error=0.5)])
    assert row["median_error"] == 0.5 and row["mean_log_error"] == pytest.approx(math.log(0.5))
    assert row["count"] == 1 and row["iqr"] == 0.0
    rows = summarize([_rec(rep=k, error=e) for k, e in enumerate([1.0, 2.0, 4.0])])
    assert rows[0]["median_error"] == 2.0
    assert rows[0]["mean_log_error"] == pytest.approx(math.log(2.0))


def test_summarize_counts_failures():
    recs = [_rec(rep=k, error=1.0 + k) for k in range(99)] + [_rec(rep=99, error=math.nan,
                                                                   converged=False)]
    (row,) = summarize(recs)
    assert row["count"] == 99 and row["failed"] == 1


def test_summarize_empty():
    with pytest.raises(EmptyInput):
        summarize([])


def test_emit_header_only(tmp_path):
    p = tmp_path / "e.csv"
    emit([], p)
    assert p.read_text() == ",".join(CSV_FIELDS) + "\n"


def test_emit_one_record_and_roundtrip(tmp_path):
    p = tmp_path / "r.csv"
    rec = _rec(error=1 / 3, eps=0.25)
    emit([rec], p)
    lines = p.read_text().splitlines()
    assert len(lines) == 2
    row = next(csv.DictReader(open(p)))
    assert row["error"] == "0.333333333333"
    back = load_records(p)
    assert back[0].estimator == rec.estimator and back[0].epsilon == 0.25
    assert back[0].error == pytest.approx(rec.error, rel=1e-11)
    q = tmp_path / "r2.csv"
    emit(back, q)
    assert filecmp.cmp(p, q, shallow=False)


def test_emit_json(tmp_path):
    p = tmp_path / "r.json"
    emit([_rec()], p, "json")
    assert json.loads(p.read_text())[0]["estimator"] == "mcqr"


def test_emit_io_error(tmp_path):
    with pytest.raises(IoError):
        emit([], tmp_path / "missing" / "x.csv")


def test_cli_ot(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    np.savetxt(a, [[0.0], [2.0]], delimiter=",")
    np.savetxt(b, [[1.0], [3.0]], delimiter=",")
    assert cli.main(["ot", "--a", str(a), "--b", str(b)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["objective"] == pytest.approx(0.5)
    assert out["w2_squared"] == pytest.approx(1.0)
    assert out["wasserstein_product"] == pytest.approx(3.0)


@pytest.mark.parametrize("method", ["mcqr", "ols", "coorcqr", "spqr"])
def test_cli_estimate(tmp_path, capsys, method):
    g = np.random.default_rng(0)
    X = g.standard_normal((40, 2))
    B = np.array([[1.0, -2.0], [0.5, 3.0]])
    np.savetxt(tmp_path / "x.csv", X, delimiter=",")
    np.savetxt(tmp_path / "y.csv", X @ B.T + 0.01 * g.standard_normal((40, 2)), delimiter=",")
    out = tmp_path / "b.csv"
    rc = cli.main(["estimate", "--x", str(tmp_path / "x.csv"), "--y", str(tmp_path / "y.csv"),
                   "--method", method, "--out", str(out), "--seed", "1"])
    assert rc == 0
    diag = json.loads(capsys.readouterr().out)
    assert diag["method"] == method
    assert np.allclose(np.loadtxt(out, delimiter=",", ndmin=2), B, atol=0.1)
    if method == "mcqr":
        assert {"objective", "grad_residual", "iterations"} <= set(diag)


def test_cli_estimate_subgradient(tmp_path, capsys):
    g = np.random.default_rng(1)
    X = g.standard_normal((30, 1))
    np.savetxt(tmp_path / "x.csv", X, delimiter=",")
    np.savetxt(tmp_path / "y.csv", 2 * X + 0.1 * g.standard_normal((30, 1)), delimiter=",")
    rc = cli.main(["estimate", "--x", str(tmp_path / "x.csv"), "--y", str(tmp_path / "y.csv"),
                   "--solver", "subgradient", "--m", "50", "--out", str(tmp_path / "b.csv")])
    assert rc == 0
    assert json.loads(capsys.readouterr().out)["solver"] == "subgradient"


def test_cli_missing_file_is_user_error(tmp_path):
    assert cli.main(["ot", "--a", str(tmp_path / "nope.csv"), "--b", str(tmp_path / "b.csv")]) == 2


def test_cli_bench_and_jobs_env(tmp_path, capsys, monkeypatch):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"name": "t", "estimators": ["ols"], "d": 2, "p": 2,
                               "n_grid": [20], "reps": 2, "seed": 4}))
    monkeypatch.setenv("MCQR_JOBS", "2")
    out = tmp_path / "r.csv"
    assert cli.main(["bench", "--config", str(cfg), "--output", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 3
    assert json.loads(capsys.readouterr().out)["records"] == 2


def test_cli_verify_fast_report(tmp_path):
    out = tmp_path / "report.json"
    proc = subprocess.run([sys.executable, "-m", "mcqr.cli", "verify", "--suite", "fast",
                           "--output", str(out)], capture_output=True, text=True, timeout=600)
    assert proc.returncode == 0
    report = json.loads(out.read_text())
    assert all({"check_name", "pass", "statistic", "tolerance"} <= set(r) for r in report)
    assert all(r["pass"] for r in report)


def test_numba_fallback_agrees():
    code = ("import json, numpy as np\n"
            "from mcqr._jit import USING_NUMBA\n"
            "from mcqr.ot_solver import solve_ot\n"
            "from mcqr.dataset import RegressionDataset\n"
            "from mcqr.estimator import fit_mcqr_lp\n"
            "g = np.random.default_rng(0)\n"
            "a, b = g.standard_normal((30, 2)), g.standard_normal((30, 2))\n"
            "X = g.standard_normal((20, 2))\n"
            "fit = fit_mcqr_lp(RegressionDataset(X, g.standard_normal((20, 2))),\n"
            "                  reference_points=g.standard_normal((20, 2)))\n"
            "print(json.dumps([USING_NUMBA, solve_ot(a, b).objective, fit.objective]))\n")
    outs = []
    for flag in ("0", "1"):
        env = dict(os.environ, MCQR_DISABLE_NUMBA=flag)
        proc = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                              text=True, check=True)
        outs.append(json.loads(proc.stdout))
    assert outs[0][0] is True and outs[1][0] is False
    assert outs[0][1] == pytest.approx(outs[1][1], rel=1e-12)
    assert outs[0][2] == pytest.approx(outs[1][2], rel=1e-12)
