"""Bi-objective quadratic example with a closed-form Pareto set.

``f1(pi) = a1 pi^2 - a2 pi`` and ``f2(pi) = a1 pi^2 - a3 pi`` (both minimised,
``a1 > 0``) have minimisers ``a2 / 2a1`` and ``a3 / 2a1``; every point between
them is Pareto optimal. Predictions off by ``eps`` shift each endpoint, and
in ``n`` independent coordinates the overlap of the predicted and true sets
shrinks like ``(1 - eps / |a2 - a3|)^n``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import pareto_indices


@dataclass
class QuadraticExample:
    a1: float
    a2: float
    a3: float
    n: int = 1
    eps_prec: float = 0.0

    def __post_init__(self):
        if not self.a1 > 0:
            raise ValueError("a1 must be positive")
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.eps_prec < 0:
            raise ValueError("eps_prec must be non-negative")

    def objectives(self, pi) -> np.ndarray:
        pi = np.asarray(pi, dtype=float)
        sq = self.a1 * pi * pi
        return np.stack([sq - self.a2 * pi, sq - self.a3 * pi], axis=-1)


@dataclass
class QuadraticParetoSet:
    lower: float
    upper: float
    degenerate: bool
    overlap_ratio: float


def overlap_ratio(a2: float, a3: float, eps_prec: float, n: int) -> float:
    gap = abs(a2 - a3)
    if gap == 0:
        raise ValueError("overlap ratio is undefined when a2 == a3")
    return max(0.0, 1.0 - eps_prec / gap) ** n


def quadratic_pareto_set(example: QuadraticExample) -> QuadraticParetoSet:
    """Per-coordinate Pareto interval and the worst-case overlap ratio."""
    e1, e2 = example.a2 / (2 * example.a1), example.a3 / (2 * example.a1)
    lo, hi = min(e1, e2), max(e1, e2)
    if example.a2 == example.a3:
        return QuadraticParetoSet(lo, hi, True, 1.0)
    return QuadraticParetoSet(lo, hi, False, overlap_ratio(example.a2, example.a3, example.eps_prec, example.n))


def grid_membership(example: QuadraticExample, step: float = 1e-3, margin: float = 1.0):
    """Grid over the interval widened by ``margin``; returns ``(grid, non-dominated mask)``.

    Both interval endpoints are added to the uniform grid so that every
    outside point has an inside neighbour that beats it on both objectives.
    """
    ps = quadratic_pareto_set(example)
    count = int(round((ps.upper - ps.lower + 2 * margin) / step)) + 1
    grid = ps.lower - margin + step * np.arange(count)
    near = (np.abs(grid - ps.lower) < 1e-9) | (np.abs(grid - ps.upper) < 1e-9)
    grid = np.unique(np.concatenate([grid[~near], [ps.lower, ps.upper]]))
    mask = np.zeros(len(grid), dtype=bool)
    mask[pareto_indices(example.objectives(grid), "min")] = True
    return grid, mask
