"""Training loops: decision-focused MoDFL and the two-stage accuracy baseline.

Both loops share the predictor, optimiser, batching and early stopping.
MoDFL records, per instance, predictor -> instance normalisation ->
uniform scalarisation -> smoothed LP layer -> surrogate losses on one tape
and back-propagates the weighted total to the network parameters.
"""
from __future__ import annotations

import json
import time
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import autodiff as ad
from .core import Dataset, MOLPInstance, check_feasible
from .dslp import DSLPError, dslp_layer
from .losses import (COMPONENTS, LossWeights, combine_var, decision_loss_var, landscape_loss_var,
                     normalized_rows_var, pareto_set_loss_var, scalarize_var)
from .ot_rank import SRMMDConfig
from .predictor import (NonFiniteGradientError, PredictorParams, init_params, predict_var, sgd_step)
from .scalarize import uniform_weight, weight_grid
from .seeding import generator, sub_seed
from .solvers import SolverError
from .solvers.multi import DEDUP_TOL, weighted_solutions

FAILURE_LIMIT = 0.05
ABLATION_LABELS = {
    "landscape": "w/o Landscape Loss",
    "decision": "w/o Decision Loss",
    "pareto_set": "w/o Pareto Set Loss",
}


class TrainingAborted(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# solution cache
# ---------------------------------------------------------------------------

class SolutionCache:
    """Per-instance FIFO pool of feasible, de-duplicated solutions."""

    def __init__(self, capacity: int = 50, tol_feasible: float = 1e-6):
        if capacity < 1:
            raise ValueError("cache capacity must be positive")
        self.capacity = capacity
        self.tol_feasible = tol_feasible
        self._store: dict[int, list[np.ndarray]] = {}
        self.flagged: set[int] = set()

    def add(self, instance: MOLPInstance, pi) -> bool:
        """Insert ``pi``; returns False for a near-duplicate. Infeasible input is an error."""
        pi = np.asarray(pi, dtype=float).reshape(-1)
        if not check_feasible(instance, pi, self.tol_feasible):
            raise ValueError(f"instance {instance.id}: refusing to cache an infeasible solution")
        pool = self._store.setdefault(instance.id, [])
        if any(np.max(np.abs(pi - s)) <= DEDUP_TOL for s in pool):
            return False
        pool.append(pi.copy())
        if len(pool) > self.capacity:
            del pool[0]
        return True

    def get(self, instance_id: int) -> np.ndarray:
        pool = self._store.get(instance_id, [])
        return np.array(pool) if pool else np.zeros((0, 0))

    def size(self, instance_id: int) -> int:
        return len(self._store.get(instance_id, []))

    def sizes(self) -> dict[str, int]:
        return {str(k): len(v) for k, v in sorted(self._store.items())}


def seed_cache(instances, capacity: int = 50) -> SolutionCache:
    """Cache initialised with each instance's true Pareto set; instances with fewer than two are flagged."""
    if isinstance(instances, Dataset):
        instances = instances.instances
    cache = SolutionCache(capacity)
    for inst in instances:
        cache._store.setdefault(inst.id, [])
        for pi in inst.pareto_set:
            cache.add(inst, pi)
        if cache.size(inst.id) < 2:
            cache.flagged.add(inst.id)
            warnings.warn(f"instance {inst.id}: fewer than two cached solutions; landscape loss will be skipped",
                          RuntimeWarning, stacklevel=2)
    return cache


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass
class TrainConfig:
    lr: float = 0.1
    batch_size: int = 8
    max_epochs: int = 50
    patience: int = 5
    gamma: float = 0.35
    lambdas: tuple = (1.0, 2.0, 5.0)  # landscape, decision, pareto set
    p_solve: float = 1.0
    seed: int = 0
    ablate: tuple = ()
    refresh_weights: int = 3  # grid weights solved per cache refresh
    cache_capacity: int = 50
    denom: int = 5
    ot_epsilon: float = 1e-5
    ot_tau: float = 0.5
    decision_normalized: bool = True
    clip_norm: float | None = 10.0
    trunk_sizes: tuple = (64, 64)
    head_sizes: tuple = (64,)

    def __post_init__(self):
        self.lambdas = tuple(float(v) for v in self.lambdas)
        self.ablate = tuple(self.ablate)
        self.trunk_sizes = tuple(self.trunk_sizes)
        self.head_sizes = tuple(self.head_sizes)
        self.validate()

    def validate(self) -> None:
        if not self.lr >= 0:
            raise ValueError("lr must be non-negative")
        for name in ("batch_size", "max_epochs", "cache_capacity", "refresh_weights", "denom"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.patience < 0:
            raise ValueError("patience must be non-negative")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive during training")
        if not 0.0 <= self.p_solve <= 1.0:
            raise ValueError("p_solve must lie in [0, 1]")
        if len(self.lambdas) != 3:
            raise ValueError("lambdas must be (landscape, decision, pareto_set)")
        self.loss_weights()

    def loss_weights(self) -> LossWeights:
        return LossWeights(*self.lambdas).ablate(*self.ablate)

    def label(self) -> str:
        return ", ".join(ABLATION_LABELS[a] for a in self.ablate) or "full"

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainResult:
    params: PredictorParams
    log: list[dict]
    best_epoch: int
    solver_calls: int = 0
    dslp_calls: int = 0
    failures: int = 0
    cache: SolutionCache | None = None

    def write_log(self, path) -> None:
        with open(path, "w") as fh:
            for rec in self.log:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")


@dataclass
class _Counters:
    solver_calls: int = 0
    dslp_calls: int = 0
    failures: int = 0
    processed: int = 0
    rejected_steps: int = 0


# ---------------------------------------------------------------------------
# MoDFL
# ---------------------------------------------------------------------------

def _srmmd_config(cfg: TrainConfig, instance_id: int) -> SRMMDConfig:
    return SRMMDConfig(tau=cfg.ot_tau, epsilon=cfg.ot_epsilon, seed=sub_seed(cfg.seed, "ot", instance_id))


def _refresh_cache(inst: MOLPInstance, yhat: np.ndarray, cache: SolutionCache, cfg: TrainConfig,
                   rng: np.random.Generator, counters: _Counters) -> None:
    grid = weight_grid(inst.t_objectives, cfg.denom)
    picks = rng.choice(len(grid), size=min(cfg.refresh_weights, len(grid)), replace=False)
    sols = weighted_solutions(inst.sign * yhat, inst.A, inst.b, inst.bounds, [grid[k] for k in picks],
                              center=False)
    counters.solver_calls += len(picks)
    for pi in sols:
        cache.add(inst, pi)


def modfl_instance_loss(params: PredictorParams, inst: MOLPInstance, cache: SolutionCache, cfg: TrainConfig,
                        *, rng: np.random.Generator | None = None, counters: _Counters | None = None,
                        grad: bool = True):
    """Loss components (floats) and, with ``grad``, parameter gradients for one instance.

    When ``rng`` is given the cache may be refreshed with solutions of the
    predicted problem (probability ``p_solve``).
    """
    counters = counters or _Counters()
    weights = cfg.loss_weights()
    tape = ad.Tape()
    yhat, leaves = predict_var(params, inst.features, tape)
    bn = normalized_rows_var(yhat * inst.sign)
    c = scalarize_var(bn, uniform_weight(inst.t_objectives))
    pi_hat, _ = dslp_layer(c, inst.A, inst.b, inst.bounds, cfg.gamma)
    counters.dslp_calls += 1
    if rng is not None and cfg.p_solve > 0 and rng.random() <= cfg.p_solve:
        _refresh_cache(inst, yhat.value, cache, cfg, rng, counters)
    comps = {}
    if weights.landscape != 0:
        comps["landscape"] = landscape_loss_var(inst, bn, cache.get(inst.id), _srmmd_config(cfg, inst.id))
    if weights.decision != 0:
        comps["decision"] = decision_loss_var(inst, pi_hat, cfg.decision_normalized)
    if weights.pareto_set != 0:
        comps["pareto_set"] = pareto_set_loss_var(pi_hat, inst.pareto_set)
    total = combine_var(comps, weights)
    values = {n: (float(comps[n].value) if comps.get(n) is not None else 0.0) for n in COMPONENTS}
    values["total"] = float(total.value) if total is not None else 0.0
    grads = None
    if grad:
        grads = tape.backward(total, leaves) if total is not None else [np.zeros_like(t) for t in params.tensors()]
    return values, grads


def _mean_losses(records: list[dict]) -> dict:
    if not records:
        return {k: float("nan") for k in ("l", "d", "ps", "total")}
    arr = {k: float(np.mean([r[k] for r in records])) for k in (*COMPONENTS, "total")}
    return {"l": arr["landscape"], "d": arr["decision"], "ps": arr["pareto_set"], "total": arr["total"]}


def _check_failures(counters: _Counters) -> None:
    if counters.processed and counters.failures / counters.processed > FAILURE_LIMIT:
        raise TrainingAborted(
            f"solver failures on {counters.failures} of {counters.processed} instance evaluations "
            f"(limit {FAILURE_LIMIT:.0%})")


def _epochs(dataset: Dataset, cfg: TrainConfig, params: PredictorParams,
            train_step: Callable, val_loss: Callable, extra: Callable[[], dict],
            counters: _Counters) -> tuple[PredictorParams, list[dict], int]:
    """Shared loop: shuffled batches, averaged gradients, early stopping on validation loss."""
    train = dataset.subset("train")
    val = dataset.subset("val") or train
    if not train:
        raise ValueError("dataset has no training instances")
    rng = generator(cfg.seed, "training")
    best = (val_loss(params, val), params.copy(), 0)
    log = [{"epoch": 0, "train_losses": None, "val_total": best[0], **extra(), "wall_time_s": 0.0}]
    stale = 0
    t0 = time.perf_counter()
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(len(train))
        records = []
        for start in range(0, len(order), cfg.batch_size):
            acc, count = None, 0
            for k in order[start:start + cfg.batch_size]:
                counters.processed += 1
                try:
                    values, grads = train_step(params, train[k], rng)
                except (SolverError, DSLPError) as exc:
                    counters.failures += 1
                    warnings.warn(f"instance {train[k].id}: {exc}", RuntimeWarning, stacklevel=2)
                    continue
                records.append(values)
                acc = grads if acc is None else [a + g for a, g in zip(acc, grads)]
                count += 1
            _check_failures(counters)
            if count:
                try:
                    params = sgd_step(params, [a / count for a in acc], cfg.lr, cfg.clip_norm)
                except NonFiniteGradientError as exc:
                    counters.rejected_steps += 1
                    warnings.warn(str(exc), RuntimeWarning, stacklevel=2)
        v = val_loss(params, val)
        log.append({"epoch": epoch, "train_losses": _mean_losses(records), "val_total": v, **extra(),
                    "wall_time_s": round(time.perf_counter() - t0, 6)})
        if v < best[0]:
            best, stale = (v, params.copy(), epoch), 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    return best[1], log, best[2]


def default_params(dataset: Dataset, cfg: TrainConfig) -> PredictorParams:
    inst = dataset.instances[0]
    kinds = inst.meta.get("cost_kinds", ["real"] * inst.t_objectives)
    outputs = ["sigmoid" if k == "probability" else "identity" for k in kinds]
    return init_params(inst.features.shape[1], inst.t_objectives, cfg.trunk_sizes, cfg.head_sizes,
                       outputs=outputs, seed=sub_seed(cfg.seed, "init"))


def train_modfl(dataset: Dataset, config: TrainConfig | None = None,
                params: PredictorParams | None = None) -> TrainResult:
    """Decision-focused training with the solution cache and early stopping."""
    cfg = config or TrainConfig()
    for inst in dataset.instances:
        if len(inst.pareto_set) == 0:
            raise ValueError(f"instance {inst.id} has no precomputed Pareto set")
    params = params or default_params(dataset, cfg)
    cache = seed_cache(dataset, cfg.cache_capacity)
    counters = _Counters()

    def step(p, inst, rng):
        return modfl_instance_loss(p, inst, cache, cfg, rng=rng, counters=counters)

    def val_loss(p, insts):
        totals = []
        for inst in insts:
            counters.processed += 1
            try:
                values, _ = modfl_instance_loss(p, inst, cache, cfg, counters=counters, grad=False)
            except (SolverError, DSLPError) as exc:
                counters.failures += 1
                warnings.warn(f"instance {inst.id}: {exc}", RuntimeWarning, stacklevel=2)
                continue
            totals.append(values["total"])
        _check_failures(counters)
        return float(np.mean(totals)) if totals else float("inf")

    def extra():
        return {"cache_sizes": cache.sizes(), "solver_calls": counters.solver_calls}

    best, log, best_epoch = _epochs(dataset, cfg, params, step, val_loss, extra, counters)
    for rec in log:
        rec["method"] = "modfl"
        rec["setting"] = cfg.label()
    return TrainResult(best, log, best_epoch, counters.solver_calls, counters.dslp_calls, counters.failures, cache)


# ---------------------------------------------------------------------------
# TwoStage
# ---------------------------------------------------------------------------

def _bce_var(p: ad.Var, y: np.ndarray, floor: float = 1e-12) -> ad.Var:
    """Mean binary cross-entropy of probabilities ``p`` against targets ``y``."""
    q = np.clip(p.value, floor, 1.0 - floor)
    val = -np.mean(y * np.log(q) + (1.0 - y) * np.log(1.0 - q))

    def vjp(g):
        return g * (q - y) / (q * (1.0 - q)) / y.size

    return ad.custom([p], np.array(val), [vjp], name="bce")


def twostage_instance_loss(params: PredictorParams, inst: MOLPInstance, grad: bool = True):
    """Uniformly weighted accuracy loss over objectives (MSE, or BCE for probability costs)."""
    tape = ad.Tape()
    yhat, leaves = predict_var(params, inst.features, tape)
    kinds = inst.meta.get("cost_kinds", ["real"] * inst.t_objectives)
    terms = []
    for j in range(inst.t_objectives):
        if kinds[j] == "probability":
            terms.append(_bce_var(yhat[j], inst.costs[j]))
        else:
            d = yhat[j] - inst.costs[j]
            terms.append((d * d).mean())
    total = terms[0]
    for t in terms[1:]:
        total = total + t
    total = total * (1.0 / len(terms))
    grads = tape.backward(total, leaves) if grad else None
    return float(total.value), grads


def train_twostage(dataset: Dataset, config: TrainConfig | None = None,
                   params: PredictorParams | None = None) -> TrainResult:
    """Accuracy-only baseline with the same predictor, optimiser and stopping rule."""
    cfg = config or TrainConfig()
    params = params or default_params(dataset, cfg)
    counters = _Counters()

    def step(p, inst, rng):
        v, g = twostage_instance_loss(p, inst)
        return {"landscape": 0.0, "decision": 0.0, "pareto_set": 0.0, "total": v}, g

    def val_loss(p, insts):
        return float(np.mean([twostage_instance_loss(p, inst, grad=False)[0] for inst in insts]))

    best, log, best_epoch = _epochs(dataset, cfg, params, step, val_loss, lambda: {}, counters)
    for rec in log:
        rec["method"] = "twostage"
        rec["setting"] = "accuracy"
    return TrainResult(best, log, best_epoch)


def read_log(path) -> list[dict]:
    return [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]
