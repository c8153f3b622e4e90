import numpy as np
import pytest

from modfl import autodiff as ad


def numeric_grad(f, x, h=1e-6):
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        e = np.zeros_like(x)
        e[idx] = h
        g[idx] = (f(x + e) - f(x - e)) / (2 * h)
    return g


OPS = {
    "exp": lambda v: ad.exp(v).sum(),
    "log": lambda v: ad.log(v * v + 1.0).sum(),
    "sqrt": lambda v: ad.sqrt(v * v + 0.5).sum(),
    "sigmoid": lambda v: ad.sigmoid(v).sum(),
    "softplus": lambda v: ad.softplus(v).sum(),
    "logsumexp": lambda v: ad.logsumexp(v, axis=1).sum(),
    "softmax": lambda v: (ad.softmax(v, axis=0) * np.arange(12.0).reshape(3, 4)).sum(),
    "matmul": lambda v: ad.matmul(v, ad.transpose(v)).sum(),
    "sq_dists": lambda v: ad.sq_dists(v, v * 2.0).sum(),
    "power": lambda v: ad.power(v * v + 1.0, 1.5).sum(),
    "div": lambda v: (v / (v * v + 2.0)).sum(),
    "broadcast": lambda v: (v + v.sum(axis=0, keepdims=True)).mean(),
}


@pytest.mark.parametrize("name", sorted(OPS))
def test_op_gradients(name, rng):
    x0 = rng.normal(size=(3, 4))
    fn = OPS[name]

    def value(x):
        return float(fn(ad.Tape().const(x)).value)

    tape = ad.Tape()
    x = tape.leaf(x0)
    (g,) = tape.backward(fn(x), [x])
    assert np.allclose(g, numeric_grad(value, x0), atol=1e-6)


def test_indexing_and_stack(rng):
    tape = ad.Tape()
    x = tape.leaf(rng.normal(size=(3, 2)))
    y = ad.stack([x[0] * 2.0, x[2]], axis=0)
    (g,) = tape.backward(y.sum(), [x])
    assert np.allclose(g, [[2, 2], [0, 0], [1, 1]])


def test_tape_cannot_be_reused():
    tape = ad.Tape()
    x = tape.leaf(np.ones(2))
    out = (x * x).sum()
    tape.backward(out, [x])
    with pytest.raises(ad.TapeReuseError):
        tape.backward(out, [x])


def test_unused_leaf_gets_zero():
    tape = ad.Tape()
    x, y = tape.leaf(np.ones(2)), tape.leaf(np.ones(3))
    gx, gy = tape.backward((x * 3.0).sum(), [x, y])
    assert np.allclose(gx, 3) and not gy.any()
