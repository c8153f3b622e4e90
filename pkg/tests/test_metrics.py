import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from modfl.metrics import (UnsupportedDimensionError, evaluate_predictor, gd, har, hypervolume,
                           hypervolume_detail, instance_regret, mpfe, regret)
from modfl.predictor import OraclePredictor
from modfl.solvers import single_objective_optima
from modfl.verify import brute_gd, brute_mpfe, mc_hypervolume

from conftest import make_instance, matching_instance


def test_gd_and_mpfe_cases():
    F = np.array([[1.0, 2.0], [2.0, 1.0]])
    assert gd(F, F) == 0 and mpfe(F, F) == 0
    assert gd([[0, 0]], [[3, 4]]) == pytest.approx(5)
    assert mpfe([[0, 0]], [[3, 4]]) == pytest.approx(5)
    assert mpfe([[0, 0]], [[3, 4]], p=1) == pytest.approx(7)


def test_gd_mpfe_brute_force(rng):
    for _ in range(10):
        P, Q = rng.random((10, 2)), rng.random((10, 2))
        assert abs(gd(P, Q) - brute_gd(P, Q)) <= 1e-12
        assert abs(mpfe(P, Q) - brute_mpfe(P, Q)) <= 1e-12


def test_hypervolume_cases():
    assert hypervolume([[1, 1]], [2, 2]) == pytest.approx(1)
    assert hypervolume([[0, 1], [1, 0]], [2, 2]) == pytest.approx(3)
    assert hypervolume([[1, 1]], [0, 0], "max") == pytest.approx(1)
    F = np.array([[0.2, 0.5], [0.4, 0.1]])
    assert har(F, F, [1, 1]) == pytest.approx(1)


def _inclusion_exclusion(points, ref):
    total = 0.0
    for k in range(1, len(points) + 1):
        for sub in itertools.combinations(points, k):
            corner = np.max(sub, axis=0)
            total += (-1) ** (k + 1) * np.prod(np.maximum(ref - corner, 0))
    return total


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(*[st.floats(0, 1, allow_nan=False)] * 3), min_size=1, max_size=6))
def test_hypervolume_3d_inclusion_exclusion(points):
    pts = np.array(points)
    ref = np.ones(3) * 1.5
    assert hypervolume(pts, ref) == pytest.approx(_inclusion_exclusion(pts, ref), abs=1e-9)


def test_hypervolume_monte_carlo(rng):
    P = rng.random((8, 2))
    ref = np.array([1.2, 1.2])
    mc = mc_hypervolume(P, ref, 200_000, rng)
    assert abs(hypervolume(P, ref) - mc) / hypervolume(P, ref) < 0.02


def test_hypervolume_clipping_and_dimension():
    res = hypervolume_detail([[3, 3], [1, 1]], [2, 2])
    assert res.clipped == 1 and res.value == pytest.approx(1)
    with pytest.warns(RuntimeWarning):
        hypervolume([[3, 3]], [2, 2])
    with pytest.raises(UnsupportedDimensionError):
        hypervolume([[1, 1, 1, 1]], [2, 2, 2, 2])


def test_regret_exact_and_arithmetic():
    inst = make_instance([[10.0, 8.0]], A=np.array([[1.0, 1.0]]), b=np.array([1.0]), orientation="max")
    opt = single_objective_optima(inst)
    gaps, valid = instance_regret(inst, [opt[0]])
    assert gaps[0] == 0 and valid[0]
    gaps, _ = instance_regret(inst, [[0.0, 1.0]])
    assert gaps[0] == pytest.approx(0.2)


def test_regret_spreadsheet_recomputation(rng):
    insts, sols, manual = [], [], []
    for k in range(3):
        inst = matching_instance(rng.random((2, 4)) + 0.1)
        S = np.array([[1, 0, 0, 1], [0, 1, 1, 0]], float)
        insts.append(inst)
        sols.append(S)
        row = []
        for j in range(2):
            fstar = max(inst.costs[j] @ p for p in ([1, 0, 0, 1], [0, 1, 1, 0]))
            row.append((fstar - inst.costs[j] @ S[j]) / abs(fstar))
        manual.append(row)
    res = regret(insts, sols)
    assert np.allclose(res.per_objective, np.mean(manual, axis=0), atol=1e-12)
    assert res.r == pytest.approx(np.mean(manual))


def test_oracle_predictor_is_perfect():
    r = np.random.default_rng(3)
    insts = [matching_instance(r.random((2, 9)), 3, 3) for _ in range(4)]
    row, records = evaluate_predictor("oracle", insts, OraclePredictor())
    assert row.flags["har_skipped"] < len(insts)
    assert row.gd <= 1e-6 and abs(row.har - 1) <= 1e-6 and abs(row.r) <= 1e-6


def test_two_point_front_has_no_area():
    inst = matching_instance([[3, 1, 1, 3], [1, 3, 3, 1]])
    row, _ = evaluate_predictor("oracle", [inst], OraclePredictor())
    assert row.flags["har_skipped"] == 1 and np.isnan(row.har)
