"""A small reverse-mode automatic differentiation engine on numpy arrays.

A :class:`Tape` records every operation applied to its :class:`Var` objects
in creation order; :meth:`Tape.backward` walks that list once in reverse and
returns gradients for the requested leaves. A tape can be differentiated
only once, which keeps stale graphs from being reused by accident.

Operations with a known closed-form vector-Jacobian product (the optimisation
layer, instance normalisation, the log-sum-exp Sinkhorn step) are recorded
as single nodes through :func:`custom`.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


class TapeReuseError(RuntimeError):
    """Raised when a tape is differentiated twice or mixed with another tape."""


class Tape:
    def __init__(self):
        self._nodes: list[Var] = []
        self.used = False

    def _register(self, var: "Var") -> int:
        if self.used:
            raise TapeReuseError("tape has already been differentiated; record a new forward pass")
        self._nodes.append(var)
        return len(self._nodes) - 1

    def leaf(self, value, name: str = "") -> "Var":
        """A differentiable input."""
        return Var(self, np.asarray(value, dtype=float), (), name=name)

    def const(self, value) -> "Var":
        return Var(self, np.asarray(value, dtype=float), (), name="const", requires_grad=False)

    def __len__(self) -> int:
        return len(self._nodes)

    def backward(self, output: "Var", wrt: Sequence["Var"], seed=None) -> list[np.ndarray]:
        """Gradients of ``output`` (scalar unless ``seed`` is given) with respect to ``wrt``."""
        if self.used:
            raise TapeReuseError("tape has already been differentiated")
        if output.tape is not self:
            raise TapeReuseError("output belongs to a different tape")
        self.used = True
        adj: dict[int, np.ndarray] = {}
        if seed is None:
            if output.value.size != 1:
                raise ValueError("backward from a non-scalar output needs an explicit seed")
            seed = np.ones_like(output.value)
        adj[output.index] = np.asarray(seed, dtype=float).reshape(output.value.shape)
        keep = {w.index for w in wrt}
        for node in reversed(self._nodes[: output.index + 1]):
            g = adj.get(node.index) if node.index in keep else adj.pop(node.index, None)
            if g is None:
                continue
            for parent, vjp in node.parents:
                if not parent.requires_grad:
                    continue
                contrib = vjp(g)
                prev = adj.get(parent.index)
                adj[parent.index] = contrib if prev is None else prev + contrib
        return [adj.get(w.index, np.zeros_like(w.value)) for w in wrt]


class Var:
    __array_priority__ = 100.0

    def __init__(self, tape: Tape, value: np.ndarray, parents, name: str = "", requires_grad: bool = True):
        self.tape = tape
        self.value = value
        self.parents = tuple(parents)
        self.name = name
        self.requires_grad = requires_grad or any(p.requires_grad for p, _ in self.parents)
        self.index = tape._register(self)

    @property
    def shape(self) -> tuple:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    @property
    def T(self) -> "Var":
        return transpose(self)

    def __repr__(self) -> str:
        return f"Var({self.name or 'node'}, shape={self.value.shape})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, key):
        return getitem(self, key)

    def __pow__(self, p):
        return power(self, p)

    def sum(self, axis=None, keepdims=False):
        return vsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        return reshape(self, shape[0] if len(shape) == 1 else shape)


def _tape_of(*xs) -> Tape:
    tapes = {id(x.tape): x.tape for x in xs if isinstance(x, Var)}
    if len(tapes) != 1:
        raise TapeReuseError("operands must live on exactly one tape")
    return next(iter(tapes.values()))


def _lift(x, tape: Tape) -> Var:
    if isinstance(x, Var):
        if x.tape is not tape:
            raise TapeReuseError("operands must live on the same tape")
        return x
    return tape.const(x)


def value(x) -> np.ndarray:
    return x.value if isinstance(x, Var) else np.asarray(x, dtype=float)


def unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``g`` down to ``shape`` (reverse of numpy broadcasting)."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, size in enumerate(shape):
        if size == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g.reshape(shape)


def custom(inputs: Sequence, out_value: np.ndarray, vjps: Sequence[Callable], name: str = "custom") -> Var:
    """Record an operation with hand-written vector-Jacobian products.

    ``vjps[k](g)`` must return the gradient contribution for ``inputs[k]``.
    """
    tape = _tape_of(*inputs)
    parents = [(_lift(x, tape), f) for x, f in zip(inputs, vjps)]
    return Var(tape, np.asarray(out_value, dtype=float), parents, name=name)


def _binary(a, b, fn, da, db, name):
    tape = _tape_of(a, b)
    a, b = _lift(a, tape), _lift(b, tape)
    out = fn(a.value, b.value)
    return Var(tape, out, [(a, lambda g: unbroadcast(da(g, a.value, b.value), a.shape)),
                           (b, lambda g: unbroadcast(db(g, a.value, b.value), b.shape))], name=name)


def add(a, b) -> Var:
    return _binary(a, b, np.add, lambda g, x, y: g, lambda g, x, y: g, "add")


def sub(a, b) -> Var:
    return _binary(a, b, np.subtract, lambda g, x, y: g, lambda g, x, y: -g, "sub")


def mul(a, b) -> Var:
    return _binary(a, b, np.multiply, lambda g, x, y: g * y, lambda g, x, y: g * x, "mul")


def div(a, b) -> Var:
    return _binary(a, b, np.divide, lambda g, x, y: g / y, lambda g, x, y: -g * x / (y * y), "div")


def matmul(a, b) -> Var:
    tape = _tape_of(a, b)
    a, b = _lift(a, tape), _lift(b, tape)
    if a.ndim != 2 or b.ndim not in (1, 2):
        raise ValueError("matmul supports (k,m) @ (m,) or (k,m) @ (m,n)")
    if b.ndim == 1:
        return Var(tape, a.value @ b.value,
                   [(a, lambda g: np.outer(g, b.value)), (b, lambda g: a.value.T @ g)], name="matmul")
    return Var(tape, a.value @ b.value,
               [(a, lambda g: g @ b.value.T), (b, lambda g: a.value.T @ g)], name="matmul")


def _unary(x, out, d, name) -> Var:
    return Var(x.tape, out, [(x, d)], name=name)


def exp(x: Var) -> Var:
    out = np.exp(x.value)
    return _unary(x, out, lambda g: g * out, "exp")


def log(x: Var) -> Var:
    return _unary(x, np.log(x.value), lambda g: g / x.value, "log")


def sqrt(x: Var) -> Var:
    out = np.sqrt(x.value)
    return _unary(x, out, lambda g: g * 0.5 / out, "sqrt")


def power(x: Var, p: float) -> Var:
    return _unary(x, x.value ** p, lambda g: g * p * x.value ** (p - 1), "pow")


def relu(x: Var) -> Var:
    mask = x.value > 0
    return _unary(x, np.where(mask, x.value, 0.0), lambda g: g * mask, "relu")


def sigmoid(x: Var) -> Var:
    out = 0.5 * (1.0 + np.tanh(0.5 * x.value))
    return _unary(x, out, lambda g: g * out * (1.0 - out), "sigmoid")


def softplus(x: Var) -> Var:
    out = np.logaddexp(0.0, x.value)
    sig = 0.5 * (1.0 + np.tanh(0.5 * x.value))
    return _unary(x, out, lambda g: g * sig, "softplus")


def vsum(x: Var, axis=None, keepdims: bool = False) -> Var:
    shape = x.shape

    def d(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return np.broadcast_to(g, shape).copy()

    return _unary(x, x.value.sum(axis=axis, keepdims=keepdims), d, "sum")


def mean(x: Var, axis=None, keepdims: bool = False) -> Var:
    count = x.value.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return vsum(x, axis, keepdims) / float(count)


def reshape(x: Var, shape) -> Var:
    old = x.shape
    return _unary(x, x.value.reshape(shape), lambda g: g.reshape(old), "reshape")


def transpose(x: Var) -> Var:
    return _unary(x, x.value.T, lambda g: g.T, "transpose")


def getitem(x: Var, key) -> Var:
    shape = x.shape

    def d(g):
        out = np.zeros(shape)
        np.add.at(out, key, g)
        return out

    return _unary(x, x.value[key], d, "getitem")


def stack(xs: Sequence[Var], axis: int = 0) -> Var:
    tape = _tape_of(*xs)
    xs = [_lift(x, tape) for x in xs]
    parents = [(x, (lambda k: lambda g: np.take(g, k, axis=axis))(k)) for k, x in enumerate(xs)]
    return Var(tape, np.stack([x.value for x in xs], axis=axis), parents, name="stack")


def concatenate(xs: Sequence[Var], axis: int = 0) -> Var:
    tape = _tape_of(*xs)
    xs = [_lift(x, tape) for x in xs]
    bounds = np.cumsum([0] + [x.shape[axis] for x in xs])
    parents = []
    for k, x in enumerate(xs):
        sl = [slice(None)] * x.ndim
        sl[axis] = slice(bounds[k], bounds[k + 1])
        parents.append((x, (lambda s: lambda g: g[s])(tuple(sl))))
    return Var(tape, np.concatenate([x.value for x in xs], axis=axis), parents, name="concat")


def logsumexp(x: Var, axis: int) -> Var:
    mx = x.value.max(axis=axis, keepdims=True)
    e = np.exp(x.value - mx)
    s = e.sum(axis=axis, keepdims=True)
    soft = e / s
    out = (np.log(s) + mx).squeeze(axis)
    return _unary(x, out, lambda g: np.expand_dims(g, axis) * soft, "logsumexp")


def softmax(x: Var, axis: int) -> Var:
    mx = x.value.max(axis=axis, keepdims=True)
    e = np.exp(x.value - mx)
    out = e / e.sum(axis=axis, keepdims=True)

    def d(g):
        return out * (g - (g * out).sum(axis=axis, keepdims=True))

    return _unary(x, out, d, "softmax")


def sq_dists(x: Var | np.ndarray, y: Var | np.ndarray) -> Var:
    """Pairwise squared Euclidean distances between the rows of ``x`` and ``y``."""
    tape = _tape_of(*(v for v in (x, y) if isinstance(v, Var)))
    x, y = _lift(x, tape), _lift(y, tape)
    diff = x.value[:, None, :] - y.value[None, :, :]
    out = np.einsum("ijk,ijk->ij", diff, diff)
    return Var(tape, out, [
        (x, lambda g: 2.0 * np.einsum("ij,ijk->ik", g, diff)),
        (y, lambda g: -2.0 * np.einsum("ij,ijk->jk", g, diff)),
    ], name="sq_dists")
