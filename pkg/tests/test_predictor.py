import numpy as np
import pytest

from modfl.predictor import (Layer, NonFiniteGradientError, PredictorParams, init_params, load_params, predict,
                             save_params, sgd_step)


def relu(x):
    return np.maximum(x, 0)


def manual_forward(params, X):
    h = X
    for layer in params.trunk:
        h = relu(h @ layer.W + layer.b)
    outs = []
    for j, head in enumerate(params.heads):
        z = h
        for k, layer in enumerate(head):
            z = z @ layer.W + layer.b
            if k < len(head) - 1:
                z = relu(z)
        z = z[:, 0]
        outs.append(1 / (1 + np.exp(-z)) if params.outputs[j] == "sigmoid" else z)
    return np.vstack(outs)


def test_zero_params_predict_zero(rng):
    p = init_params(3, 2, (4,), (4,), seed=0)
    z = p.with_tensors([np.zeros_like(t) for t in p.tensors()])
    assert np.array_equal(predict(z, rng.random((5, 3))), np.zeros((2, 5)))


def test_configured_identity():
    p = PredictorParams(1, [], [[Layer(np.ones((1, 1)), np.zeros(1))]], "identity", ["identity"])
    x = np.array([[0.5], [-2.0], [3.0]])
    assert np.allclose(predict(p, x), x.T)


def test_matches_manual_recomputation(rng):
    p = init_params(5, 2, (8, 8), (6,), outputs=["identity", "sigmoid"], seed=3)
    X = rng.normal(size=(7, 5))
    assert np.allclose(predict(p, X), manual_forward(p, X), atol=1e-12)
    assert p.depth() == 4


def test_zero_upstream_gives_zero_gradient(rng):
    p = init_params(3, 2, seed=1)
    fwd = predict(p, rng.random((4, 3)), record=True)
    assert all(not g.any() for g in fwd.backward(np.zeros((2, 4))))


def test_single_linear_layer_outer_product(rng):
    W, b = rng.normal(size=(3, 1)), rng.normal(size=1)
    p = PredictorParams(3, [], [[Layer(W, b)]], "identity", ["identity"])
    X = rng.normal(size=(4, 3))
    gW, gb = predict(p, X, record=True).backward(np.ones((1, 4)))
    assert np.allclose(gW[:, 0], X.sum(axis=0)) and np.allclose(gb, 4)


def test_full_gradient_finite_differences(rng):
    p = init_params(4, 2, (6, 6), (6,), activation="sigmoid", seed=2)
    X = rng.normal(size=(5, 4))
    U = rng.normal(size=(2, 5))
    grads = predict(p, X, record=True).backward(U)
    tensors = p.tensors()
    h = 1e-6
    picks = [(t, idx) for t in range(len(tensors)) for idx in np.ndindex(tensors[t].shape)]
    for t, idx in [picks[i] for i in rng.choice(len(picks), 50, replace=False)]:
        def loss(delta):
            ts = [x.copy() for x in tensors]
            ts[t][idx] += delta
            return float(np.sum(U * predict(p.with_tensors(ts), X)))
        fd = (loss(h) - loss(-h)) / (2 * h)
        assert abs(grads[t][idx] - fd) <= 1e-4 * max(abs(fd), 1e-3)


def test_sgd_step_cases():
    p = PredictorParams(1, [], [[Layer(np.array([[1.0]]), np.array([0.0]))]], "identity", ["identity"])
    zero = [np.zeros_like(t) for t in p.tensors()]
    assert sgd_step(p, zero).equals(p)
    assert sgd_step(p, [np.ones((1, 1)), np.ones(1)], lr=0).equals(p)
    q = sgd_step(p, [np.array([[0.5]]), np.array([0.0])], lr=0.1)
    assert q.heads[0][0].W[0, 0] == pytest.approx(0.95)
    with pytest.raises(NonFiniteGradientError):
        sgd_step(p, [np.array([[np.nan]]), np.array([0.0])])


def test_clipping_limits_step():
    p = PredictorParams(1, [], [[Layer(np.array([[0.0]]), np.array([0.0]))]], "identity", ["identity"])
    q = sgd_step(p, [np.array([[100.0]]), np.array([0.0])], lr=1.0, clip=10.0)
    assert q.heads[0][0].W[0, 0] == pytest.approx(-10.0)


def test_checkpoint_round_trip(tmp_path):
    p = init_params(3, 2, (4,), (4,), outputs=["sigmoid", "identity"], seed=9)
    save_params(p, tmp_path / "c.json")
    assert load_params(tmp_path / "c.json").equals(p)


def test_init_is_seeded():
    assert init_params(3, 2, seed=5).equals(init_params(3, 2, seed=5))
    assert not init_params(3, 2, seed=5).equals(init_params(3, 2, seed=6))
