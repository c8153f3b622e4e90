import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from modfl.losses import (LossConfigError, LossWeights, decision_loss, landscape_loss, nearest_member,
                          pareto_set_loss, total_loss)
from modfl.ot_rank import SRMMDConfig
from modfl.scalarize import normalize_costs

from conftest import make_instance

# distance smoothing moves non-zero values down by at most sqrt(1e-12)
SHIFT = 1e-6 + 1e-12


def test_pareto_set_loss_hit():
    v, g = pareto_set_loss([1.0, 0.0], [[0.0, 1.0], [1.0, 0.0]])
    assert v <= 1e-9 and np.allclose(g, 0)


def test_pareto_set_loss_geometry():
    v, g = pareto_set_loss([0.0, 0.0], [[3.0, 4.0]])
    assert v == pytest.approx(5.0, abs=SHIFT)
    assert np.allclose(g, [-0.6, -0.8], atol=1e-9)


def test_pareto_set_loss_tie_prefers_first_member():
    ps = [[1.0, 0.0], [0.0, 1.0]]
    v, g = pareto_set_loss([0.0, 0.0], ps)
    assert v == pytest.approx(1.0, abs=SHIFT)
    assert nearest_member(np.zeros(2), np.array(ps)) == 0
    assert np.allclose(g, [-1.0, 0.0], atol=1e-9)


def test_pareto_set_loss_empty_set():
    with pytest.raises(LossConfigError):
        pareto_set_loss([0.0], np.zeros((0, 1)))


def test_decision_loss_cases(rng):
    inst = make_instance([[1.0, 2.0, 3.0], [3.0, 1.0, 2.0]])
    assert decision_loss(inst, np.zeros(3))[0] == 0.0
    # BN rows that cancel under averaging
    inst2 = make_instance([[0.0, 2.0], [2.0, 0.0]])
    assert decision_loss(inst2, [0.5, 0.5])[0] == pytest.approx(0.0, abs=1e-12)
    costs = rng.normal(size=(3, 6))
    inst3 = make_instance(costs, orientation="max")
    pi = rng.random(6)
    bn = normalize_costs(-costs).values
    expected = np.mean([bn[j] @ pi for j in range(3)])
    v, g = decision_loss(inst3, pi)
    assert v == pytest.approx(expected, abs=1e-12)
    assert np.allclose(g, bn.mean(axis=0))


def test_total_loss_arithmetic():
    assert total_loss((1, 1, 1)).total == 8
    assert total_loss((0, 0, 0)).total == 0
    ablated = LossWeights().ablate("pareto_set")
    assert total_loss((1, 1, 1), ablated).total == 3
    with pytest.raises(LossConfigError):
        LossWeights(-1, 2, 5)
    with pytest.raises(LossConfigError):
        LossWeights().ablate("nope")


@settings(max_examples=30, deadline=None)
@given(st.tuples(*[st.floats(0, 10)] * 3), st.tuples(*[st.floats(0, 10)] * 3))
def test_total_loss_is_weighted_sum(comps, lams):
    rep = total_loss(comps, lams)
    assert rep.total == pytest.approx(sum(c * l for c, l in zip(comps, lams)))


CFG = SRMMDConfig(epsilon=0.1)


def test_landscape_loss_zero_for_exact_prediction(rng):
    costs = rng.random((2, 4))
    inst = make_instance(costs, orientation="max")
    S = rng.random((3, 4))
    v, _ = landscape_loss(inst, costs, S, CFG)
    assert v <= 1e-8


def test_landscape_loss_positive_for_flipped_objective():
    costs = np.array([[1.0, 0.0, 0.5, 0.2], [0.0, 1.0, 0.4, 0.9]])
    inst = make_instance(costs, orientation="max")
    S = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 1.0]])
    pred = costs.copy()
    pred[1] = -pred[1]
    assert landscape_loss(inst, pred, S, CFG)[0] > 0


def test_landscape_gradient_finite_differences(rng):
    costs = rng.random((2, 4))
    inst = make_instance(costs, orientation="max")
    S = rng.random((3, 4))
    pred = costs + 0.3 * rng.normal(size=costs.shape)
    v, g = landscape_loss(inst, pred, S, CFG)
    h = 1e-6
    for j in range(2):
        for k in range(4):
            E = np.zeros_like(pred)
            E[j, k] = h
            fd = (landscape_loss(inst, pred + E, S, CFG)[0] - landscape_loss(inst, pred - E, S, CFG)[0]) / (2 * h)
            assert abs(g[j, k] - fd) <= 1e-3 * max(abs(fd), 1e-4)


def test_landscape_loss_needs_two_solutions(rng):
    inst = make_instance(rng.random((2, 4)))
    with pytest.warns(RuntimeWarning):
        v, g = landscape_loss(inst, inst.costs, np.ones((1, 4)), CFG)
    assert v == 0.0 and not g.any()
