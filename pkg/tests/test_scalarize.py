import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from modfl import autodiff as ad
from modfl.scalarize import (instance_normalize, instance_normalize_var, normalize_costs, scale_costs,
                             weight_grid, weighted_cost)


def test_normalize_hand_value():
    z, stats = instance_normalize([2, 4, 6])
    assert np.allclose(z, [-np.sqrt(1.5), 0.0, np.sqrt(1.5)], atol=1e-12)
    assert stats.std == pytest.approx(np.sqrt(8 / 3))


def test_normalize_degenerate():
    z, stats = instance_normalize([5, 5, 5])
    assert z.tolist() == [0, 0, 0] and stats.degenerate


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(-1000, 1000), min_size=2, max_size=20, unique=True))
def test_normalize_preserves_order(values):
    y = np.array(values, dtype=float)
    z, _ = instance_normalize(y)
    assert np.array_equal(np.argsort(z, kind="stable"), np.argsort(y, kind="stable"))
    assert abs(z.mean()) < 1e-9 and abs(z.std() - 1) < 1e-9


def test_weighted_cost_cases(rng):
    bn = np.array([[-1.0, 1.0], [1.0, -1.0]])
    assert np.allclose(weighted_cost(bn, [0.5, 0.5]), 0.0)
    nc = normalize_costs(rng.normal(size=(2, 6)))
    assert np.array_equal(weighted_cost(nc, [1, 0]), nc.values[0])
    vals = rng.normal(size=(3, 7))
    w = np.array([0.2, 0.3, 0.5])
    expected = [sum(w[j] * vals[j, k] for j in range(3)) for k in range(7)]
    assert np.allclose(weighted_cost(vals, w), expected, atol=1e-12)


def test_weight_grid():
    g = weight_grid(2, 5)
    assert len(g) == 6
    assert np.allclose(g[0], [0, 1]) and np.allclose(g[1], [0.2, 0.8]) and np.allclose(g[-1], [1, 0])
    assert len(weight_grid(3, 5)) == 21
    assert [w.tolist() for w in weight_grid(2, 1)] == [[0, 1], [1, 0]]
    assert all(abs(w.sum() - 1) < 1e-12 for w in weight_grid(4, 3))


def test_scale_costs_keeps_sign(rng):
    y = rng.normal(size=(2, 9))
    sc = scale_costs(y)
    assert np.allclose(sc.values * y.std(axis=1, keepdims=True), y)


def test_normalize_var_gradient(rng):
    y0 = rng.normal(size=6)
    g = rng.normal(size=6)

    def f(y):
        return float(g @ instance_normalize(y)[0])

    tape = ad.Tape()
    y = tape.leaf(y0)
    out = (instance_normalize_var(y) * g).sum()
    (grad,) = tape.backward(out, [y])
    h = 1e-6
    fd = np.array([(f(y0 + h * e) - f(y0 - h * e)) / (2 * h) for e in np.eye(6)])
    assert np.allclose(grad, fd, atol=1e-7)
