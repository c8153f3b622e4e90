"""One check per acceptance criterion; each prints a single PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py`` (lines appear in the terminal
summary) or directly with ``python tests/test_acceptance.py``.
"""
import warnings

import pytest

from modfl import verify

RESULTS: dict[int, str] = {}

CRITERIA = {
    1: ("DSLP gradients vs finite differences", verify.suite_dslp, 30.0),
    2: ("sRMMD identity, symmetry, gradients and Sinkhorn convergence", verify.suite_srmmd, 60.0),
    3: ("weighted-sum optima are Pareto optimal", verify.suite_weighted_sum, None),
    4: ("metric oracles", verify.suite_metrics, None),
    5: ("quadratic example interval, grid and overlap", verify.suite_quadratic, None),
    6: ("perfect-prediction limit", verify.suite_perfect_prediction, None),
    7: ("MoDFL regret <= TwoStage in at least 3 of 5 seeds", verify.suite_e2e, 600.0),
    8: ("integral inference decisions", verify.suite_integrality, None),
    9: ("identical training logs for one seed", verify.suite_determinism, None),
}


def run_criterion(number: int):
    title, suite, budget = CRITERIA[number]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = suite()
    ok = res.passed and (budget is None or res.runtime_s < budget)
    extra = f", budget {budget:.0f}s" if budget else ""
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number} ({title}): {res.detail} ({res.runtime_s:.1f}s{extra})"
    RESULTS[number] = line
    print(line)
    return ok, line


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number):
    ok, line = run_criterion(number)
    assert ok, line


if __name__ == "__main__":
    import sys

    outcomes = [run_criterion(k)[0] for k in sorted(CRITERIA)]
    sys.exit(0 if all(outcomes) else 1)
