"""Surrogate decision losses and their weighted combination.

Each loss has a tape form (``*_var``) used by the trainer and a plain form
returning ``(value, gradient)`` for direct checking. All losses work in the
minimisation orientation on instance-normalised costs.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .core import DimensionError, MOLPInstance
from .ot_rank import SRMMDConfig, srmmd_var
from .scalarize import instance_normalize_var, normalize_costs, weighted_cost

DIST_SMOOTHING = 1e-12
COMPONENTS = ("landscape", "decision", "pareto_set")


class LossConfigError(ValueError):
    pass


@dataclass(frozen=True)
class LossWeights:
    landscape: float = 1.0
    decision: float = 2.0
    pareto_set: float = 5.0

    def __post_init__(self):
        for name in COMPONENTS:
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise LossConfigError(f"lambda for {name} must be a non-negative number, got {v}")

    def ablate(self, *names: str) -> "LossWeights":
        """Copy with the named components switched off."""
        unknown = set(names) - set(COMPONENTS)
        if unknown:
            raise LossConfigError(f"unknown loss component(s): {sorted(unknown)}")
        vals = {n: (0.0 if n in names else getattr(self, n)) for n in COMPONENTS}
        return LossWeights(**vals)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.landscape, self.decision, self.pareto_set)


@dataclass
class LossReport:
    landscape: float
    decision: float
    pareto_set: float
    total: float
    weights: LossWeights
    per_instance: list[dict] = field(default_factory=list)


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def normalized_rows_var(costs: ad.Var) -> ad.Var:
    """Row-wise instance normalisation of a ``(T, n)`` variable."""
    return ad.stack([instance_normalize_var(costs[j]) for j in range(costs.shape[0])], axis=0)


def scalarize_var(bn: ad.Var, w) -> ad.Var:
    """``w @ BN`` with the value computed exactly as :func:`weighted_cost` does."""
    w = np.asarray(w, dtype=float)
    return ad.custom([bn], weighted_cost(bn.value, w), [lambda g: np.outer(w, g)], name="scalarize")


def _true_bn(instance: MOLPInstance, normalized: bool = True) -> np.ndarray:
    canon = instance.canonical_costs
    return normalize_costs(canon).values if normalized else canon


# ---------------------------------------------------------------------------
# landscape loss
# ---------------------------------------------------------------------------

def landscape_loss_var(instance: MOLPInstance, pred_bn: ad.Var, solutions: np.ndarray,
                       config: SRMMDConfig | None = None) -> ad.Var | None:
    """sRMMD between true and predicted normalised objective vectors of cached solutions.

    ``pred_bn`` holds the normalised canonical predicted costs. Returns None
    (and warns) when fewer than two solutions are available.
    """
    S = np.atleast_2d(np.asarray(solutions, dtype=float))
    if S.shape[0] < 2:
        warnings.warn(f"instance {instance.id}: solution cache has {S.shape[0]} entries; landscape loss skipped",
                      RuntimeWarning, stacklevel=2)
        return None
    if S.shape[1] != instance.n_vars:
        raise DimensionError(f"cached solutions have {S.shape[1]} entries, expected {instance.n_vars}")
    tape = pred_bn.tape
    true_obj = tape.const(S @ _true_bn(instance).T)  # (k, T)
    pred_obj = ad.matmul(tape.const(S), pred_bn.T)  # (k, T)
    out, _ = srmmd_var(true_obj, pred_obj, config)
    return out


def landscape_loss(instance: MOLPInstance, predicted_costs, solutions,
                   config: SRMMDConfig | None = None) -> tuple[float, np.ndarray]:
    """Value and gradient with respect to the native predicted costs."""
    tape = ad.Tape()
    yhat = tape.leaf(np.atleast_2d(predicted_costs))
    bn = normalized_rows_var(yhat * instance.sign)
    out = landscape_loss_var(instance, bn, solutions, config)
    if out is None:
        return 0.0, np.zeros_like(yhat.value)
    (g,) = tape.backward(out, [yhat])
    return float(out.value), g


# ---------------------------------------------------------------------------
# Pareto set loss
# ---------------------------------------------------------------------------

def nearest_member(pi_hat: np.ndarray, pareto_set: np.ndarray) -> int:
    """Index of the closest member; ties go to the earliest member in stored order."""
    d2 = np.sum((pareto_set - pi_hat) ** 2, axis=1)
    return int(np.argmin(d2))


def pareto_set_loss_var(pi_hat: ad.Var, pareto_set) -> ad.Var:
    P = np.atleast_2d(np.asarray(pareto_set, dtype=float))
    if P.size == 0:
        raise LossConfigError("Pareto set loss needs a non-empty Pareto set")
    if P.shape[1] != pi_hat.shape[0]:
        raise DimensionError(f"Pareto set members have {P.shape[1]} entries, pi_hat has {pi_hat.shape[0]}")
    k = nearest_member(pi_hat.value, P)
    diff = pi_hat - P[k]
    # shifted so that an exact hit scores 0 with a zero gradient
    return ad.sqrt((diff * diff).sum() + DIST_SMOOTHING) - np.sqrt(DIST_SMOOTHING)


def pareto_set_loss(pi_hat, pareto_set) -> tuple[float, np.ndarray]:
    tape = ad.Tape()
    x = tape.leaf(np.asarray(pi_hat, dtype=float).reshape(-1))
    out = pareto_set_loss_var(x, pareto_set)
    (g,) = tape.backward(out, [x])
    return float(out.value), g


# ---------------------------------------------------------------------------
# decision loss
# ---------------------------------------------------------------------------

def decision_loss_var(instance: MOLPInstance, pi_hat: ad.Var, normalized: bool = True) -> ad.Var:
    """Mean over objectives of the (normalised, canonical) true cost of ``pi_hat``."""
    if pi_hat.shape != (instance.n_vars,):
        raise DimensionError(f"pi_hat has shape {pi_hat.shape}, expected ({instance.n_vars},)")
    c = _true_bn(instance, normalized).mean(axis=0)
    return ad.matmul(pi_hat.tape.const(c[None, :]), pi_hat)[0]


def decision_loss(instance: MOLPInstance, pi_hat, normalized: bool = True) -> tuple[float, np.ndarray]:
    tape = ad.Tape()
    x = tape.leaf(np.asarray(pi_hat, dtype=float).reshape(-1))
    out = decision_loss_var(instance, x, normalized)
    (g,) = tape.backward(out, [x])
    return float(out.value), g


# ---------------------------------------------------------------------------
# combination
# ---------------------------------------------------------------------------

def combine_var(components: dict, weights: LossWeights):
    """Weighted sum on the tape. Components with zero weight are never touched."""
    total = None
    for name in COMPONENTS:
        lam = getattr(weights, name)
        term = components.get(name)
        if lam == 0 or term is None:
            continue
        scaled = term * lam
        total = scaled if total is None else total + scaled
    return total


def total_loss(components, weights: LossWeights | tuple = LossWeights(), per_instance=None) -> LossReport:
    """Combine component values (a mapping or a ``(l, d, ps)`` triple)."""
    if not isinstance(weights, LossWeights):
        weights = LossWeights(*weights)
    if not isinstance(components, dict):
        components = dict(zip(COMPONENTS, components))
    vals = {n: float(components.get(n, 0.0) or 0.0) for n in COMPONENTS}
    for n, v in vals.items():
        if not np.isfinite(v):
            raise ValueError(f"{n} loss is not finite")
    total = sum(getattr(weights, n) * vals[n] for n in COMPONENTS if getattr(weights, n) != 0)
    return LossReport(vals["landscape"], vals["decision"], vals["pareto_set"], float(total), weights,
                      list(per_instance or []))
