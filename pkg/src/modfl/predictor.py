"""Multi-head fully connected cost predictor.

A shared trunk maps each cell's feature row to a hidden representation and
one head per objective maps that to a scalar score. The default shape is two
trunk layers plus two head layers, so every input-to-output path crosses
four weight layers. Heads can apply a sigmoid for probability-valued costs.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad

ACTIVATIONS = ("relu", "sigmoid", "identity")
OUTPUTS = ("identity", "sigmoid")
CLIP_NORM = 10.0


class NonFiniteGradientError(FloatingPointError):
    pass


@dataclass
class Layer:
    W: np.ndarray  # (fan_in, fan_out)
    b: np.ndarray  # (fan_out,)


@dataclass
class PredictorParams:
    in_dim: int
    trunk: list[Layer]
    heads: list[list[Layer]]
    activation: str = "relu"
    outputs: list[str] = field(default_factory=list)  # per-head output transform
    seed: int = 0

    @property
    def t_objectives(self) -> int:
        return len(self.heads)

    def layers(self) -> list[Layer]:
        return self.trunk + [layer for head in self.heads for layer in head]

    def tensors(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers():
            out += [layer.W, layer.b]
        return out

    def with_tensors(self, tensors) -> "PredictorParams":
        it = iter(np.array(t, dtype=float) for t in tensors)
        trunk = [Layer(next(it), next(it)) for _ in self.trunk]
        heads = [[Layer(next(it), next(it)) for _ in head] for head in self.heads]
        return PredictorParams(self.in_dim, trunk, heads, self.activation, list(self.outputs), self.seed)

    def copy(self) -> "PredictorParams":
        return self.with_tensors(self.tensors())

    def depth(self) -> int:
        """Weight layers on each input-to-output path."""
        return len(self.trunk) + len(self.heads[0])

    def equals(self, other: "PredictorParams") -> bool:
        a, b = self.tensors(), other.tensors()
        return (self.in_dim == other.in_dim and self.activation == other.activation
                and self.outputs == other.outputs and len(a) == len(b)
                and all(x.shape == y.shape and np.array_equal(x, y) for x, y in zip(a, b)))


def init_params(in_dim: int, t_objectives: int, trunk_sizes=(64, 64), head_sizes=(64,),
                activation: str = "relu", outputs=None, seed: int = 0) -> PredictorParams:
    """Seeded fan-in uniform initialisation, ``U(-1/sqrt(fan_in), 1/sqrt(fan_in))``."""
    if activation not in ACTIVATIONS:
        raise ValueError(f"activation must be one of {ACTIVATIONS}")
    outputs = list(outputs or ["identity"] * t_objectives)
    if len(outputs) != t_objectives or any(o not in OUTPUTS for o in outputs):
        raise ValueError(f"outputs must list one of {OUTPUTS} per objective")
    rng = np.random.default_rng(seed)

    def layer(fan_in, fan_out):
        bound = 1.0 / np.sqrt(fan_in)
        return Layer(rng.uniform(-bound, bound, (fan_in, fan_out)), rng.uniform(-bound, bound, fan_out))

    trunk, width = [], in_dim
    for h in trunk_sizes:
        trunk.append(layer(width, h))
        width = h
    heads = []
    for _ in range(t_objectives):
        head, w = [], width
        for h in head_sizes:
            head.append(layer(w, h))
            w = h
        head.append(layer(w, 1))
        heads.append(head)
    return PredictorParams(in_dim, trunk, heads, activation, outputs, seed)


def _act(x: ad.Var, kind: str) -> ad.Var:
    if kind == "relu":
        return ad.relu(x)
    if kind == "sigmoid":
        return ad.sigmoid(x)
    return x


@dataclass
class Forward:
    """A recorded forward pass: output ``(T, n)`` plus the parameter leaves."""

    tape: ad.Tape
    output: ad.Var
    leaves: list[ad.Var]

    def backward(self, upstream) -> list[np.ndarray]:
        """Parameter gradients for ``dL/dy_hat = upstream``."""
        return self.tape.backward(self.output, self.leaves, seed=np.asarray(upstream, dtype=float))


def predict_var(params: PredictorParams, features, tape: ad.Tape) -> tuple[ad.Var, list[ad.Var]]:
    """Record the network on ``tape``; returns ``(y_hat (T, n), parameter leaves)``."""
    X = np.atleast_2d(np.asarray(features, dtype=float))
    if X.shape[1] != params.in_dim:
        raise ValueError(f"features have dimension {X.shape[1]}, predictor expects {params.in_dim}")
    leaves = [tape.leaf(t) for t in params.tensors()]
    it = iter(leaves)
    h = tape.const(X)
    for _ in params.trunk:
        W, b = next(it), next(it)
        h = _act(h @ W + b, params.activation)
    outs = []
    for j, head in enumerate(params.heads):
        z = h
        for k in range(len(head)):
            W, b = next(it), next(it)
            z = z @ W + b
            if k < len(head) - 1:
                z = _act(z, params.activation)
        z = ad.reshape(z, (-1,))
        outs.append(ad.sigmoid(z) if params.outputs[j] == "sigmoid" else z)
    return ad.stack(outs, axis=0), leaves


def predict(params: PredictorParams, features, *, record: bool = False):
    """Predicted costs ``(T, n)``; with ``record=True`` a :class:`Forward` is returned instead."""
    tape = ad.Tape()
    out, leaves = predict_var(params, features, tape)
    if record:
        return Forward(tape, out, leaves)
    return out.value.copy()


def global_norm(grads) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))


def sgd_step(params: PredictorParams, grads, lr: float = 0.1, clip: float | None = CLIP_NORM) -> PredictorParams:
    """``theta - lr * g`` with optional clipping of the global gradient norm.

    Non-finite gradients raise :class:`NonFiniteGradientError` and leave the
    parameters untouched.
    """
    grads = [np.asarray(g, dtype=float) for g in grads]
    tensors = params.tensors()
    if len(grads) != len(tensors) or any(g.shape != t.shape for g, t in zip(grads, tensors)):
        raise ValueError("gradient shapes do not match the parameters")
    if not all(np.all(np.isfinite(g)) for g in grads):
        bad = [k for k, g in enumerate(grads) if not np.all(np.isfinite(g))]
        raise NonFiniteGradientError(f"non-finite gradient in tensor(s) {bad}; step rejected")
    scale = 1.0
    if clip is not None:
        norm = global_norm(grads)
        if norm > clip:
            scale = clip / norm
    return params.with_tensors([t - lr * scale * g for t, g in zip(tensors, grads)])


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

def params_to_dict(params: PredictorParams) -> dict:
    return {
        "architecture": {
            "in_dim": params.in_dim,
            "trunk": [list(layer.W.shape) for layer in params.trunk],
            "heads": [[list(layer.W.shape) for layer in head] for head in params.heads],
            "activation": params.activation,
            "outputs": params.outputs,
            "seed": params.seed,
        },
        "tensors": [t.tolist() for t in params.tensors()],
    }


def params_from_dict(doc: dict) -> PredictorParams:
    arch = doc["architecture"]
    it = iter(doc["tensors"])

    def take(shape):
        W = np.array(next(it), dtype=float).reshape(shape)
        b = np.array(next(it), dtype=float).reshape(shape[1])
        return Layer(W, b)

    trunk = [take(s) for s in arch["trunk"]]
    heads = [[take(s) for s in head] for head in arch["heads"]]
    return PredictorParams(int(arch["in_dim"]), trunk, heads, arch["activation"], list(arch["outputs"]),
                           int(arch.get("seed", 0)))


def save_params(params: PredictorParams, path) -> None:
    Path(path).write_text(json.dumps(params_to_dict(params)))


def load_params(path) -> PredictorParams:
    return params_from_dict(json.loads(Path(path).read_text()))


class OraclePredictor:
    """Stand-in model that returns each instance's true costs."""

    def predict_instance(self, instance) -> np.ndarray:
        return instance.costs.copy()


class NetworkPredictor:
    def __init__(self, params: PredictorParams):
        self.params = params

    def predict_instance(self, instance) -> np.ndarray:
        return predict(self.params, instance.features)
