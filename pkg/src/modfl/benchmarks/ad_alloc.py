"""Advertisement allocation with category exposure targets."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp

from ..core import Dataset, MOLPInstance, default_split
from ..seeding import generator
from .common import Teacher, attach_pareto, sigmoid


@dataclass
class AdAllocConfig:
    nd: int = 100  # queries
    nc: int = 53  # candidate ads
    delta: tuple = (0.2, 0.2, 0.2, 0.2, 0.2)  # exposure target per category
    thr: float = 0.05
    query_dim: int = 6
    ad_dim: int = 6
    teacher_hidden: int = 16
    teacher_seed: int = 0
    seed: int = 0
    denom: int = 5
    categories: tuple | None = None  # c(j); default spreads ads over categories round-robin

    def __post_init__(self):
        self.delta = tuple(float(d) for d in self.delta)
        if self.categories is not None:
            self.categories = tuple(int(c) for c in self.categories)
        self.validate()

    @property
    def k(self) -> int:
        return len(self.delta)

    def validate(self) -> None:
        if self.nd < 1 or self.nc < 1:
            raise ValueError("nd and nc must be positive")
        if self.thr <= 0:
            raise ValueError("thr must be positive")
        if any(d < 0 for d in self.delta):
            raise ValueError("delta entries must be non-negative")
        if sum(max(d - self.thr, 0.0) for d in self.delta) > 1.0:
            raise ValueError("infeasible exposure targets: sum of max(delta_k - thr, 0) exceeds 1")
        lo, hi = self.exposure_bounds()
        if np.any(lo > hi) or lo.sum() > self.nd:
            raise ValueError("infeasible exposure targets after integer rounding")
        cats = self.category_of()
        if len(cats) != self.nc or set(cats) != set(range(self.k)):
            raise ValueError("every category needs at least one candidate and categories must be 0..K-1")

    def category_of(self) -> np.ndarray:
        if self.categories is not None:
            return np.asarray(self.categories)
        return np.arange(self.nc) % self.k

    def exposure_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Integer exposure counts allowed per category (rounded inward)."""
        d = np.asarray(self.delta)
        lo = np.array([max(0, math.ceil(self.nd * (x - self.thr) - 1e-9)) for x in d])
        hi = np.array([math.floor(self.nd * (x + self.thr) + 1e-9) for x in d])
        return lo, hi


def exposure_constraints(cfg: AdAllocConfig) -> tuple[sp.csr_matrix, np.ndarray]:
    """One-ad-per-query rows, then upper and lower category exposure rows (cells are query-major)."""
    nd, nc = cfg.nd, cfg.nc
    per_query = sp.kron(sp.eye(nd), np.ones((1, nc)))
    member = np.zeros((cfg.k, nc))
    member[cfg.category_of(), np.arange(nc)] = 1.0
    exposure = sp.kron(np.ones((1, nd)), sp.csr_matrix(member))
    lo, hi = cfg.exposure_bounds()
    A = sp.vstack([per_query, exposure, -exposure]).tocsr()
    b = np.concatenate([np.ones(nd), hi.astype(float), -lo.astype(float)])
    return A, b


def gen_ad_alloc(config: AdAllocConfig | None = None, count: int = 300) -> Dataset:
    """Synthetic allocation instances with teacher click and re-login probabilities."""
    cfg = config or AdAllocConfig()
    if count < 1:
        raise ValueError("count must be positive")
    trng = generator(cfg.teacher_seed, "teacher")
    dim = cfg.query_dim + cfg.ad_dim
    teachers = [Teacher(dim, cfg.teacher_hidden, trng, bias=-1.0), Teacher(dim, cfg.teacher_hidden, trng, bias=-0.5)]
    A, b = exposure_constraints(cfg)
    instances = []
    for idx in range(count):
        rng = generator(cfg.seed, "data", idx)
        q = rng.normal(size=(cfg.nd, cfg.query_dim))
        a = rng.normal(size=(cfg.nc, cfg.ad_dim))
        X = np.hstack([np.repeat(q, cfg.nc, axis=0), np.tile(a, (cfg.nd, 1))])
        costs = np.vstack([sigmoid(t.logits(X)) for t in teachers])
        inst = MOLPInstance(idx, X, costs, A, b, None, "max",
                            meta={"benchmark": "ad_alloc", "cost_kinds": ["probability", "probability"]})
        instances.append(attach_pareto(inst, cfg.denom))
    return Dataset(instances, default_split(count), {"benchmark": "ad_alloc", "config": asdict(cfg)})
