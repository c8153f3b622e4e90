"""Bi- and tri-objective bipartite matching with perturbed labels."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..core import Dataset, MOLPInstance, default_split
from ..seeding import generator
from .common import Teacher, attach_pareto, matching_constraints, sigmoid

PERTURB_MODES = ("intent", "literal")


@dataclass
class BipartiteConfig:
    nodes: int = 100  # split evenly between the two sides
    rho: float = 0.05
    feature_dim: int = 8
    instances: int = 27
    perturb_mode: str = "intent"
    third_objective: bool = False
    edge_bias: float = -2.5  # teacher logit offset; keeps the adjacency sparse
    teacher_scale: float = 8.0  # spread of teacher logits; larger means less label noise
    teacher_hidden: int = 16
    seed: int = 0
    denom: int = 5

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.nodes < 2 or self.nodes % 2:
            raise ValueError("nodes must be a positive even number (two equal sides)")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [0, 1]")
        if self.perturb_mode not in PERTURB_MODES:
            raise ValueError(f"perturb_mode must be one of {PERTURB_MODES}")
        if self.instances < 1:
            raise ValueError("instances must be positive")
        if self.feature_dim < 1:
            raise ValueError("feature_dim must be positive")

    @property
    def side(self) -> int:
        return self.nodes // 2


def perturb_labels(y1: np.ndarray, rho: float, rng: np.random.Generator, mode: str = "intent") -> np.ndarray:
    """Second-objective labels.

    ``intent`` flips each entry with probability ``rho``; ``literal`` keeps
    an entry when ``r < rho`` and flips it otherwise.
    """
    r = rng.random(y1.shape)
    if mode == "intent":
        flip = r < rho
    elif mode == "literal":
        flip = r >= rho
    else:
        raise ValueError(f"unknown perturb mode {mode!r}")
    return np.where(flip, 1.0 - y1, y1)


def edge_features(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Row-major cell features ``concat(u_i, v_j)``."""
    nu, nv = len(u), len(v)
    return np.hstack([np.repeat(u, nv, axis=0), np.tile(v, (nu, 1))])


def third_weights(seed: int) -> np.ndarray:
    return generator(seed, "third_objective").random(2)


def make_instance(idx: int, y1: np.ndarray, features: np.ndarray, nu: int, nv: int, cfg: BipartiteConfig,
                  rng: np.random.Generator, meta: dict | None = None) -> MOLPInstance:
    y2 = perturb_labels(y1, cfg.rho, rng, cfg.perturb_mode)
    costs = [y1, y2]
    kinds = ["probability", "probability"]
    if cfg.third_objective:
        w = third_weights(cfg.seed)
        costs.append(w[0] * y1 + w[1] * y2)
        kinds.append("real")
    A, b = matching_constraints(nu, nv)
    inst = MOLPInstance(idx, features, np.vstack(costs), A, b, None, "max",
                        meta={"benchmark": "bipartite", "cost_kinds": kinds, "nu": nu, "nv": nv, **(meta or {})})
    return attach_pareto(inst, cfg.denom)


def gen_bipartite(config: BipartiteConfig | None = None) -> Dataset:
    """Synthetic matching instances with teacher-network adjacency labels."""
    cfg = config or BipartiteConfig()
    n = cfg.side
    teacher = Teacher(2 * cfg.feature_dim, cfg.teacher_hidden, generator(cfg.seed, "teacher"),
                      scale=cfg.teacher_scale, bias=cfg.edge_bias)
    instances = []
    for idx in range(cfg.instances):
        rng = generator(cfg.seed, "data", idx)
        u = rng.normal(size=(n, cfg.feature_dim))
        v = rng.normal(size=(n, cfg.feature_dim))
        X = edge_features(u, v)
        y1 = (rng.random(n * n) < sigmoid(teacher.logits(X))).astype(float)
        instances.append(make_instance(idx, y1, X, n, n, cfg, rng))
    return Dataset(instances, default_split(len(instances)), {"benchmark": "bipartite", "config": asdict(cfg)})
