"""Instance normalisation and weighted-sum scalarisation of cost vectors."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DimensionError

DEGENERATE_STD = 1e-12


@dataclass(frozen=True)
class NormStats:
    mean: float
    std: float
    degenerate: bool
    ddof: int = 0  # population std, recorded for reproducibility


@dataclass
class NormalizedCosts:
    values: np.ndarray  # (T, n)
    stats: list[NormStats]

    @property
    def t_objectives(self) -> int:
        return self.values.shape[0]


def instance_normalize(y) -> tuple[np.ndarray, NormStats]:
    """Zero-mean, unit (population) std rescaling of one cost vector.

    A vector with std below 1e-12 maps to zeros and is flagged degenerate.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.size < 2:
        raise DimensionError("instance normalisation needs at least two coefficients")
    mean = float(y.mean())
    std = float(y.std())
    if std < DEGENERATE_STD:
        return np.zeros_like(y), NormStats(mean, std, True)
    return (y - mean) / std, NormStats(mean, std, False)


def normalize_costs(costs) -> NormalizedCosts:
    costs = np.atleast_2d(np.asarray(costs, dtype=float))
    rows, stats = zip(*(instance_normalize(c) for c in costs))
    return NormalizedCosts(np.vstack(rows), list(stats))


def scale_costs(costs) -> NormalizedCosts:
    """Divide each cost vector by its population std, without centring.

    A positive rescaling of each objective keeps weighted-sum optima Pareto
    optimal, which centring does not when the total allocation varies.
    """
    costs = np.atleast_2d(np.asarray(costs, dtype=float))
    rows, stats = [], []
    for c in costs:
        std = float(c.std())
        degenerate = std < DEGENERATE_STD
        rows.append(np.zeros_like(c) if degenerate else c / std)
        stats.append(NormStats(0.0, std, degenerate))
    return NormalizedCosts(np.vstack(rows), stats)


def weighted_cost(normalized: NormalizedCosts | np.ndarray, w) -> np.ndarray:
    """``sum_j w_j * BN(y^j)``."""
    values = normalized.values if isinstance(normalized, NormalizedCosts) else np.atleast_2d(normalized)
    w = np.asarray(w, dtype=float).reshape(-1)
    if w.shape[0] != values.shape[0]:
        raise DimensionError(f"{w.shape[0]} weights for {values.shape[0]} objectives")
    return w @ values


def uniform_weight(t: int) -> np.ndarray:
    return np.full(t, 1.0 / t)


def weight_grid(t: int, denom: int = 5) -> list[np.ndarray]:
    """All weight vectors ``k / denom`` with non-negative integer ``k`` summing to ``denom``.

    Ordered lexicographically on ``k``; there are ``C(denom + t - 1, t - 1)`` of them.
    """
    if t < 2:
        raise ValueError("weight grids need at least two objectives")
    if denom < 1:
        raise ValueError("denom must be a positive integer")

    out: list[np.ndarray] = []

    def rec(prefix: list[int], remaining: int, slots: int):
        if slots == 1:
            out.append(np.array(prefix + [remaining], dtype=float) / denom)
            return
        for k in range(remaining + 1):
            rec(prefix + [k], remaining - k, slots - 1)

    rec([], denom, t)
    return out


def instance_normalize_var(y):
    """Differentiable :func:`instance_normalize` for a 1-d autodiff variable.

    The backward pass is ``(g - mean(g) - z * mean(g * z)) / std``; a
    degenerate input gives a zero output with a zero gradient.
    """
    from . import autodiff as ad

    z, stats = instance_normalize(y.value)
    if stats.degenerate:
        return ad.custom([y], z, [lambda g: np.zeros_like(g)], name="instance_norm")

    def vjp(g):
        return (g - g.mean() - z * (g * z).mean()) / stats.std

    return ad.custom([y], z, [vjp], name="instance_norm")
