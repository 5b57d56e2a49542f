"""Acceptance criteria, one test per criterion.

Each test prints a single PASS/FAIL line straight to the terminal. Running
this file as a script prints the same lines without pytest.
"""

import os
import sys

import pytest

from mcqr import verify

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
SMOKE = os.path.join(ROOT, "configs", "smoke.json")




CRITERIA = [
    (1, "ot exactness", lambda tmp: verify.check_ot_bruteforce()),
    (2, "gelbrich oracle", lambda tmp: verify.check_gelbrich_sampled()),
    (3, "superadditivity closed form", lambda tmp: verify.check_superadditivity_closed_form()),
    (4, "product perturbation bound", lambda tmp: verify.check_product_perturbation_bound()),
    (5, "mcqr duality", lambda tmp: verify.check_mcqr_duality()),
    (6, "solver agreement", lambda tmp: verify.check_solver_agreement()),
    (7, "subgradient vs finite differences", lambda tmp: verify.check_subgradient_fd()),
    (8, "near-noiseless recovery", lambda tmp: verify.check_near_noiseless()),
    (9, "consistency trend", lambda tmp: verify.check_consistency_trend()),
    (10, "heavy-tail ordering", lambda tmp: verify.check_robustness_ordering()),
    (11, "contamination ordering", lambda tmp: verify.check_contamination_ordering()),
    (12, "cqr identity", lambda tmp: verify.check_cqr_identity()),
    (13, "reference invariance", lambda tmp: verify.check_reference_invariance()),
    (14, "baseline oracles", lambda tmp: verify.check_baseline_oracles()),
    (15, "determinism", lambda tmp: verify.check_determinism(tmp, config=SMOKE)),
]


def _line(number, res):
    return f"criterion {number:>2} " + res.line()


@pytest.mark.parametrize("number,label,run", CRITERIA, ids=[f"c{n:02d}_{l.replace(' ', '_')}"
                                                            for n, l, _ in CRITERIA])
def test_criterion(number, label, run, tmp_path, capsys):
    res = run(str(tmp_path))
    with capsys.disabled():
        print("\n" + _line(number, res))
    assert res.passed, res.detail


if __name__ == "__main__":
    import tempfile

    failed = 0
    with tempfile.TemporaryDirectory() as tmp:
        for number, label, run in CRITERIA:
            res = run(tmp)
            failed += not res.passed
            print(_line(number, res), flush=True)
    sys.exit(1 if failed else 0)
