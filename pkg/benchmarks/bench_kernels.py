"""Compare compiled and pure-Python kernels on the same workloads.

Each mode runs in a fresh interpreter so that ``MCQR_DISABLE_NUMBA`` takes
effect at import time. Usage::

    python benchmarks/bench_kernels.py [--repeat 3]
"""

import argparse
import json
import os
import subprocess
import sys

CHILD = r"""
import json, sys, time
import numpy as np
from mcqr._jit import USING_NUMBA
from mcqr.dataset import RegressionDataset
from mcqr.estimator import fit_mcqr_lp
from mcqr.ot_solver import solve_ot

repeat = int(sys.argv[1])
rng = np.random.default_rng(0)
a, b = rng.standard_normal((150, 2)), rng.standard_normal((150, 2))
X = rng.standard_normal((40, 2))
data = RegressionDataset(X, X @ rng.standard_normal((2, 2)).T + rng.standard_normal((40, 2)))
U = rng.standard_normal((40, 2))

def best(fn):
    fn()  # warm-up, includes compilation or cache load
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out

t_ot, sol = best(lambda: solve_ot(a, b))
t_lp, fit = best(lambda: fit_mcqr_lp(data, reference_points=U))
print(json.dumps({"numba": USING_NUMBA, "ot_150x150_s": t_ot, "ot_objective": sol.objective,
                  "mcqr_lp_n40_s": t_lp, "mcqr_objective": fit.objective}))
"""


def run(disable, repeat):
    env = dict(os.environ)
    if disable:
        env["MCQR_DISABLE_NUMBA"] = "1"
    else:
        env.pop("MCQR_DISABLE_NUMBA", None)
    out = subprocess.run([sys.executable, "-c", CHILD, str(repeat)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    jit = run(False, args.repeat)
    py = run(True, args.repeat)
    for key in ("ot_objective", "mcqr_objective"):
        if abs(jit[key] - py[key]) > 1e-9 * (1 + abs(jit[key])):
            raise SystemExit(f"modes disagree on {key}: {jit[key]} vs {py[key]}")
    print(f"{'workload':<16}{'numba [s]':>12}{'python [s]':>12}{'speedup':>10}")
    for key, label in (("ot_150x150_s", "ot 150x150"), ("mcqr_lp_n40_s", "mcqr lp n=40")):
        print(f"{label:<16}{jit[key]:>12.4f}{py[key]:>12.4f}{py[key] / jit[key]:>10.1f}")


if __name__ == "__main__":
    main()
