"""Pareto sets of multi-objective LPs by weighted-sum enumeration."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from ..core import MOLPInstance, evaluate_objectives, pareto_indices
from ..scalarize import normalize_costs, scale_costs, uniform_weight, weight_grid, weighted_cost
from .result import as_dense
from .simplex import solve_lp

DEDUP_TOL = 1e-7


def dedup_solutions(solutions: Sequence[np.ndarray], tol: float = DEDUP_TOL) -> list[np.ndarray]:
    """Drop solutions within ``tol`` (L-infinity) of an earlier one."""
    kept: list[np.ndarray] = []
    for s in solutions:
        if not any(np.max(np.abs(s - k)) <= tol for k in kept):
            kept.append(s)
    return kept


def weighted_solutions(canonical_costs: np.ndarray, A, b, bounds,
                       weights: Sequence[np.ndarray], center: bool = True) -> list[np.ndarray]:
    """Vertex solutions of the weighted-sum LP for each weight, in weight order.

    ``center=True`` uses instance normalisation (as the learning pipeline
    does); ``center=False`` only rescales each objective by its std.
    Failures propagate as :class:`SolverError`.
    """
    norm = normalize_costs(canonical_costs) if center else scale_costs(canonical_costs)
    out = []
    for w in weights:
        sol = solve_lp(weighted_cost(norm, w), A, b, bounds).raise_for_status()
        out.append(sol.primal)
    return out


def is_pareto_optimal(canonical_costs: np.ndarray, A, b, bounds, pi, tol: float = 1e-9) -> bool:
    """Dominance test: no feasible point is at least as good everywhere and better somewhere.

    Minimises the summed objectives subject to every objective being no worse
    than at ``pi``; ``pi`` is Pareto optimal iff that cannot improve on it.
    """
    C = np.atleast_2d(canonical_costs)
    f = C @ pi
    Ad, bd = as_dense(A, b, C.shape[1])
    sol = solve_lp(C.sum(axis=0), np.vstack([Ad, C]), np.concatenate([bd, f]), bounds).raise_for_status()
    return bool(sol.objective_value >= f.sum() - tol * max(1.0, abs(f.sum())))


def solve_multiobjective(instance: MOLPInstance, denom: int = 5, *,
                         costs: np.ndarray | None = None,
                         include_uniform: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Pareto set and front of ``instance`` from the ``w/denom`` weight grid.

    Each grid weight is applied to std-scaled costs, so strictly positive
    weights give Pareto-optimal vertices. ``costs`` optionally replaces the
    instance's native costs when choosing solutions (e.g. predicted
    coefficients); the front is always evaluated and filtered on the
    instance's own costs. With ``include_uniform`` the inference decision
    (uniform weight on instance-normalised costs) is tried first and kept
    when it passes the dominance test for the costs that chose it.
    """
    native = instance.costs if costs is None else np.atleast_2d(costs)
    canonical = instance.sign * native
    weights = weight_grid(instance.t_objectives, denom)
    sols = weighted_solutions(canonical, instance.A, instance.b, instance.bounds, weights, center=False)
    if include_uniform:
        (pi,) = weighted_solutions(canonical, instance.A, instance.b, instance.bounds,
                                   [uniform_weight(instance.t_objectives)])
        if is_pareto_optimal(canonical, instance.A, instance.b, instance.bounds, pi):
            sols = [pi] + sols
    sols = dedup_solutions(sols)
    P = np.array(sols)
    F = np.array([evaluate_objectives(instance, s) for s in sols])
    keep = np.sort(pareto_indices(F, instance.orientation))
    return P[keep], F[keep]


def single_objective_optima(instance: MOLPInstance, costs: np.ndarray | None = None) -> list[np.ndarray]:
    """``pi^{*,j}``: optimum of each raw objective on its own (canonical orientation)."""
    native = instance.costs if costs is None else np.atleast_2d(costs)
    canonical = instance.sign * native
    return [solve_lp(cj, instance.A, instance.b, instance.bounds).raise_for_status().primal
            for cj in canonical]
