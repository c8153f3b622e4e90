"""Helpers shared by the benchmark generators."""
from __future__ import annotations

import numpy as np

from ..core import MOLPInstance
from ..solvers import solve_multiobjective


def attach_pareto(instance: MOLPInstance, denom: int = 5) -> MOLPInstance:
    """Fill ``pareto_set``/``pareto_front`` from the weight grid and check the invariants."""
    P, F = solve_multiobjective(instance, denom)
    instance.pareto_set = P
    instance.pareto_front = F
    instance.check_invariants()
    return instance


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=float)))


class Teacher:
    """Fixed random one-hidden-layer network producing ground-truth logits."""

    def __init__(self, in_dim: int, hidden: int, rng: np.random.Generator, scale: float = 2.0, bias: float = 0.0):
        self.W1 = rng.normal(0.0, 1.0 / np.sqrt(in_dim), (in_dim, hidden))
        self.b1 = rng.normal(0.0, 0.5, hidden)
        self.w2 = rng.normal(0.0, scale / np.sqrt(hidden), hidden)
        self.bias = bias

    def logits(self, X: np.ndarray) -> np.ndarray:
        return np.tanh(X @ self.W1 + self.b1) @ self.w2 + self.bias


def matching_constraints(nu: int, nv: int):
    """Row and column ``<= 1`` constraints of a bipartite matching on ``nu * nv`` cells (row-major)."""
    import scipy.sparse as sp

    rows = sp.kron(sp.eye(nu), np.ones((1, nv)))
    cols = sp.kron(np.ones((1, nu)), sp.eye(nv))
    return sp.vstack([rows, cols]).tocsr(), np.ones(nu + nv)
