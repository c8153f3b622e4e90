import itertools

import numpy as np
import pytest

from modfl.ot_rank import OTInputError, SoftRankMap, fit_rank_map, sinkhorn, soft_rank, srmmd, srmmd_grad


def test_single_point_coupling():
    pot = sinkhorn(np.zeros((1, 2)), np.zeros((1, 2)), 0.1)
    assert pot.coupling(np.zeros((1, 2)), np.zeros((1, 2)))[0, 0] == pytest.approx(1.0)
    assert pot.marginal_violation <= 1e-12


def test_identical_clouds_align_with_assignment(rng):
    X = rng.random((5, 2))
    pot = sinkhorn(X, X, 1e-3)
    P = pot.coupling(X, X)
    cost = lambda perm: sum(np.sum((X[i] - X[p]) ** 2) for i, p in enumerate(perm))
    best = min(itertools.permutations(range(5)), key=cost)
    assert list(np.argmax(P, axis=1)) == list(best)


def test_marginals_uniform(rng):
    X, Y = rng.random((20, 2)), rng.random((20, 2))
    for eps in (1e-1, 1e-2, 1e-3):
        pot = sinkhorn(X, Y, eps)
        P = pot.coupling(X, Y)
        assert np.max(np.abs(P.sum(axis=1) - 1 / 20)) <= 1e-6
        assert np.max(np.abs(P.sum(axis=0) - 1 / 20)) <= 1e-6


def test_small_epsilon_converges(rng):
    X, Y = rng.random((12, 2)), rng.random((12, 2))
    pot = sinkhorn(X, Y, 1e-5)
    assert pot.marginal_violation <= 1e-6


def test_rank_of_median_point():
    pts = np.array([[1.0], [2.0], [3.0]])
    targets = np.array([[1 / 6], [3 / 6], [5 / 6]])
    rmap, _ = fit_rank_map(pts, epsilon=1e-2, targets=targets)
    assert soft_rank(rmap, [2.0])[0] == pytest.approx(0.5, abs=0.05)


def test_translation_invariance(rng):
    X = rng.random((8, 2))
    shift = np.array([3.0, -2.0])
    m1, _ = fit_rank_map(X, epsilon=1e-2, seed=4)
    m2, _ = fit_rank_map(X + shift, epsilon=1e-2, seed=4)
    assert np.allclose(soft_rank(m1, X), soft_rank(m2, X + shift), atol=1e-6)


def test_single_target_map():
    q = np.array([[0.3, 0.7]])
    rmap = SoftRankMap(q, np.zeros(1), 0.1)
    assert np.allclose(soft_rank(rmap, np.random.default_rng(0).random((4, 2))), q)


def test_srmmd_identity_symmetry_monotone(rng):
    X = rng.normal(size=(8, 2)) * 0.1
    Y = rng.normal(size=(8, 2))
    assert srmmd(X, X) <= 1e-8
    assert abs(srmmd(X, Y) - srmmd(Y, X)) <= 1e-10
    assert srmmd(X, X + 10.0) > srmmd(X, X + 0.1)


def test_srmmd_rejects_bad_input():
    with pytest.raises((OTInputError, ValueError)):
        srmmd(np.zeros((3, 2)), np.zeros((3, 3)))


def test_gradient_finite_differences(rng):
    X, Y = rng.random((8, 2)), rng.random((8, 2))
    eps = 0.1
    _, gx, gy = srmmd_grad(X, Y, epsilon=eps)
    h = 1e-5
    for k in range(4):
        i, d = divmod(k, 2)
        E = np.zeros_like(X)
        E[i, d] = h
        fd = (srmmd(X + E, Y, epsilon=eps) - srmmd(X - E, Y, epsilon=eps)) / (2 * h)
        assert abs(gx[i, d] - fd) <= 1e-3 * max(abs(fd), 1e-3)


def test_gradient_vanishes_on_identical_sets(rng):
    X = rng.random((6, 2))
    _, gx, gy = srmmd_grad(X, X.copy(), epsilon=0.1)
    assert np.sqrt(np.sum(gx ** 2) + np.sum(gy ** 2)) <= 1e-6


def test_degenerate_points_give_finite_gradient():
    _, gx, gy = srmmd_grad(np.zeros((5, 2)), np.zeros((5, 2)))
    assert np.all(np.isfinite(gx)) and np.all(np.isfinite(gy))
