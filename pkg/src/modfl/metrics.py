"""Decision-quality metrics for predicted versus true Pareto fronts.

Fronts are compared in the native orientation of their instances. Distances
(GD, MPFE) are orientation-free; hypervolume converts to minimisation first.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import EmptyFrontError, FrontApproximation, MOLPInstance, evaluate_objectives, pareto_filter
from .solvers import single_objective_optima, solve_multiobjective


class UnsupportedDimensionError(ValueError):
    pass


def _points(front) -> np.ndarray:
    pts = front.points if isinstance(front, FrontApproximation) else front
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if pts.size == 0:
        raise EmptyFrontError("metric needs a non-empty front")
    return pts


def _pairwise(P: np.ndarray, Q: np.ndarray, p: float = 2.0) -> np.ndarray:
    if P.shape[1] != Q.shape[1]:
        raise ValueError("fronts have different numbers of objectives")
    diff = np.abs(P[:, None, :] - Q[None, :, :])
    if p == 2:
        return np.sqrt(np.sum(diff * diff, axis=2))
    return np.sum(diff ** p, axis=2) ** (1.0 / p)


def gd(pred_front, true_front) -> float:
    """Mean over predicted points of the distance to the nearest true point."""
    return float(_pairwise(_points(pred_front), _points(true_front)).min(axis=1).mean())


def mpfe(pred_front, true_front, p: float = 2.0) -> float:
    """Largest distance from a true point to its nearest predicted point (``p``-norm)."""
    if p <= 0:
        raise ValueError("p must be positive")
    return float(_pairwise(_points(true_front), _points(pred_front), p).min(axis=1).max())


# ---------------------------------------------------------------------------
# hypervolume
# ---------------------------------------------------------------------------

@dataclass
class HVResult:
    value: float
    clipped: int  # points not weakly better than the reference


def _hv2(pts: np.ndarray, ref: np.ndarray) -> float:
    """Area dominated by minimisation points below ``ref``."""
    pts = pts[np.lexsort((pts[:, 1], pts[:, 0]))]
    area, best_y = 0.0, ref[1]
    for x, y in pts:
        if y < best_y:
            area += (ref[0] - x) * (best_y - y)
            best_y = y
    return area


def _hv3(pts: np.ndarray, ref: np.ndarray) -> float:
    """Slice along the third objective and add up 2-d areas."""
    pts = pts[np.argsort(pts[:, 2], kind="stable")]
    vol = 0.0
    for k in range(len(pts)):
        z_next = pts[k + 1, 2] if k + 1 < len(pts) else ref[2]
        if z_next > pts[k, 2]:
            vol += _hv2(pts[: k + 1, :2], ref[:2]) * (z_next - pts[k, 2])
    return vol


def hypervolume_detail(front, reference, orientation: str = "min") -> HVResult:
    pts = _points(front)
    sign = 1.0 if orientation == "min" else -1.0
    if orientation not in ("min", "max"):
        raise ValueError("orientation must be 'min' or 'max'")
    t = pts.shape[1]
    if t not in (2, 3):
        raise UnsupportedDimensionError(f"exact hypervolume is implemented for 2 or 3 objectives, got {t}")
    canon = sign * pts
    ref = sign * np.asarray(reference, dtype=float).reshape(-1)
    if ref.shape != (t,):
        raise ValueError("reference point has the wrong length")
    inside = np.all(canon <= ref, axis=1)
    clipped = int((~inside).sum())
    canon = canon[inside]
    if len(canon) == 0:
        return HVResult(0.0, clipped)
    value = _hv2(canon, ref) if t == 2 else _hv3(canon, ref)
    return HVResult(float(value), clipped)


def hypervolume(front, reference, orientation: str = "min") -> float:
    res = hypervolume_detail(front, reference, orientation)
    if res.clipped:
        warnings.warn(f"{res.clipped} point(s) outside the reference box were ignored", RuntimeWarning, stacklevel=2)
    return res.value


def har(pred_front, true_front, reference, orientation: str = "min") -> float:
    """Hypervolume of the predicted front over that of the true front."""
    true_hv = hypervolume_detail(true_front, reference, orientation).value
    if true_hv <= 0:
        raise ValueError("true front has zero hypervolume for this reference point")
    return hypervolume_detail(pred_front, reference, orientation).value / true_hv


def reference_point(instance: MOLPInstance, optima: Sequence[np.ndarray] | None = None) -> np.ndarray:
    """Nadir of the single-objective optima: the worst value of each objective over them."""
    optima = optima if optima is not None else single_objective_optima(instance)
    F = np.array([evaluate_objectives(instance, pi) for pi in optima])
    return F.min(axis=0) if instance.orientation == "max" else F.max(axis=0)


# ---------------------------------------------------------------------------
# regret
# ---------------------------------------------------------------------------

@dataclass
class RegretResult:
    per_objective: np.ndarray  # r_1..r_T
    r: float
    skipped: int  # terms with a zero optimal value
    per_instance: list[np.ndarray] = field(default_factory=list)


def instance_regret(instance: MOLPInstance, solutions, mode: str = "per_objective",
                    optima: Sequence[np.ndarray] | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Relative gaps to the single-objective optima of the true problem.

    ``per_objective``: row ``j`` of ``solutions`` is the decision scored on
    objective ``j``. ``set``: every objective is averaged over all rows.
    Returns ``(gaps, valid)``; objectives whose optimum is zero are invalid.
    """
    S = np.atleast_2d(np.asarray(solutions, dtype=float))
    T = instance.t_objectives
    optima = optima if optima is not None else single_objective_optima(instance)
    fstar = np.array([instance.costs[j] @ optima[j] for j in range(T)])
    valid = np.abs(fstar) > 0
    s = instance.sign
    gaps = np.zeros(T)
    for j in range(T):
        if not valid[j]:
            continue
        rows = S[j:j + 1] if mode == "per_objective" else S
        if mode not in ("per_objective", "set"):
            raise ValueError("mode must be 'per_objective' or 'set'")
        vals = rows @ instance.costs[j]
        gaps[j] = float(np.mean(s * (vals - fstar[j]) / abs(fstar[j])))
    if mode == "per_objective" and S.shape[0] != T:
        raise ValueError(f"per_objective mode needs {T} solutions, got {S.shape[0]}")
    return gaps, valid


def regret(instances: Sequence[MOLPInstance], solutions: Sequence, mode: str = "per_objective") -> RegretResult:
    """Average percentage regret per objective and overall."""
    if len(instances) != len(solutions):
        raise ValueError("one solution set per instance is required")
    if not instances:
        raise ValueError("regret needs at least one instance")
    T = instances[0].t_objectives
    sums, counts, skipped, rows = np.zeros(T), np.zeros(T), 0, []
    for inst, sol in zip(instances, solutions):
        gaps, valid = instance_regret(inst, sol, mode)
        sums += np.where(valid, gaps, 0.0)
        counts += valid
        skipped += int((~valid).sum())
        rows.append(gaps)
    if skipped:
        warnings.warn(f"{skipped} regret term(s) skipped: zero optimal value", RuntimeWarning, stacklevel=2)
    per = np.divide(sums, counts, out=np.full(T, np.nan), where=counts > 0)
    return RegretResult(per, float(np.mean(per)), skipped, rows)


# ---------------------------------------------------------------------------
# evaluation of a predictor on a set of instances
# ---------------------------------------------------------------------------

@dataclass
class MetricsRow:
    method: str
    gd: float
    mpfe: float
    har: float
    r_per: list[float]
    r: float
    flags: dict = field(default_factory=dict)

    def header(self) -> list[str]:
        return ["method", "GD", "MPFE", "HAR"] + [f"r{j + 1}" for j in range(len(self.r_per))] + ["r"]

    def values(self) -> list:
        return [self.method, self.gd, self.mpfe, self.har, *self.r_per, self.r]


def write_metrics_csv(rows: Sequence[MetricsRow], path) -> None:
    if not rows:
        raise ValueError("no metric rows to write")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(rows[0].header())
        for row in rows:
            w.writerow([row.method] + [repr(float(v)) for v in row.values()[1:]])


def evaluate_instance(instance: MOLPInstance, predicted_costs, denom: int = 5) -> dict:
    """Fronts, metrics and decisions for one instance (inference uses the plain LP)."""
    yhat = np.atleast_2d(np.asarray(predicted_costs, dtype=float))
    if yhat.shape != instance.costs.shape:
        raise ValueError(f"predicted costs have shape {yhat.shape}, instance needs {instance.costs.shape}")
    _, pred_F = solve_multiobjective(instance, denom, costs=yhat)
    true_F = instance.pareto_front if len(instance.pareto_front) else solve_multiobjective(instance, denom)[1]
    pred = pareto_filter(pred_F, instance.orientation, "predicted")
    true = FrontApproximation(true_F, instance.orientation, "true")
    optima = single_objective_optima(instance)
    ref = reference_point(instance, optima)
    pred_hv = hypervolume_detail(pred, ref, instance.orientation)
    true_hv = hypervolume_detail(true, ref, instance.orientation)
    decisions = single_objective_optima(instance, costs=yhat)
    gaps, valid = instance_regret(instance, decisions, "per_objective", optima)
    return {
        "id": instance.id,
        "gd": gd(pred, true),
        "mpfe": mpfe(pred, true),
        "hv_pred": pred_hv.value,
        "hv_true": true_hv.value,
        "har": pred_hv.value / true_hv.value if true_hv.value > 0 else None,
        "clipped": pred_hv.clipped,
        "regret": gaps.tolist(),
        "regret_valid": valid.tolist(),
        "reference": ref.tolist(),
        "pred_front": pred.points.tolist(),
        "true_front": true.points.tolist(),
    }


def aggregate(method: str, records: Sequence[dict]) -> MetricsRow:
    """Dataset row: means over instances; HAR over instances with positive true hypervolume."""
    if not records:
        raise ValueError("no instances to aggregate")
    hars = [r["har"] for r in records if r["har"] is not None]
    gaps = np.array([r["regret"] for r in records])
    valid = np.array([r["regret_valid"] for r in records])
    counts = valid.sum(axis=0)
    per = np.divide((gaps * valid).sum(axis=0), counts, out=np.full(gaps.shape[1], np.nan), where=counts > 0)
    flags = {"har_skipped": len(records) - len(hars), "regret_skipped": int((~valid).sum()),
             "clipped_points": int(sum(r["clipped"] for r in records)), "instances": len(records)}
    return MetricsRow(method, float(np.mean([r["gd"] for r in records])),
                      float(np.mean([r["mpfe"] for r in records])),
                      float(np.mean(hars)) if hars else float("nan"),
                      [float(x) for x in per], float(np.mean(per)), flags)


def evaluate_predictor(method: str, instances: Sequence[MOLPInstance], predictor, denom: int = 5):
    """``(MetricsRow, per-instance records)`` for any object with ``predict_instance``."""
    records = [evaluate_instance(inst, predictor.predict_instance(inst), denom) for inst in instances]
    return aggregate(method, records), records
