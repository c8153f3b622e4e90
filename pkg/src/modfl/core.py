"""Parametric multi-objective LP instances and Pareto relations.

Every instance keeps its cost vectors in the *native* orientation of the
problem (``"max"`` for the matching and allocation benchmarks). Solvers and
losses work on :attr:`MOLPInstance.canonical_costs`, which are always in
minimisation form, so there is one dominance convention everywhere.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

ORIENTATIONS = ("min", "max")


class DimensionError(ValueError):
    """Raised when vector or matrix shapes disagree."""


class EmptyFrontError(ValueError):
    """Raised when a front or point set is empty."""


class InstanceParseError(ValueError):
    """Raised when an instance document is malformed."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"field {field_name!r}: {message}")
        self.field = field_name


def orientation_sign(orientation: str) -> float:
    """+1 for minimisation, -1 for maximisation."""
    if orientation == "min":
        return 1.0
    if orientation == "max":
        return -1.0
    raise ValueError(f"orientation must be one of {ORIENTATIONS}, got {orientation!r}")


@dataclass
class MOLPInstance:
    """One instance of ``opt_pi [y^1.pi, ..., y^T.pi]  s.t.  A pi <= b, lo <= pi <= hi``.

    ``features`` has one row per decision variable (cell); benchmarks that
    only have per-instance features broadcast them.
    """

    id: int
    features: np.ndarray
    costs: np.ndarray
    A: sp.csr_matrix
    b: np.ndarray
    bounds: np.ndarray
    orientation: str = "min"
    pareto_set: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    pareto_front: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=float))
        self.costs = np.atleast_2d(np.asarray(self.costs, dtype=float))
        self.A = sp.csr_matrix(self.A, dtype=float)
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        n = self.costs.shape[1]
        if self.bounds is None:
            self.bounds = np.tile([0.0, 1.0], (n, 1))
        self.bounds = np.asarray(self.bounds, dtype=float).reshape(-1, 2)
        orientation_sign(self.orientation)
        if self.A.shape[1] != n:
            raise DimensionError(f"A has {self.A.shape[1]} columns, costs have length {n}")
        if self.A.shape[0] != self.b.shape[0]:
            raise DimensionError(f"A has {self.A.shape[0]} rows but b has length {self.b.shape[0]}")
        if self.bounds.shape[0] != n:
            raise DimensionError(f"bounds has {self.bounds.shape[0]} rows, expected {n}")
        self.pareto_set = np.asarray(self.pareto_set, dtype=float).reshape(-1, n) if np.size(self.pareto_set) else np.zeros((0, n))
        t = self.costs.shape[0]
        self.pareto_front = np.asarray(self.pareto_front, dtype=float).reshape(-1, t) if np.size(self.pareto_front) else np.zeros((0, t))

    @property
    def n_vars(self) -> int:
        return self.costs.shape[1]

    @property
    def t_objectives(self) -> int:
        return self.costs.shape[0]

    @property
    def sign(self) -> float:
        return orientation_sign(self.orientation)

    @property
    def canonical_costs(self) -> np.ndarray:
        """Costs in minimisation form."""
        return self.sign * self.costs

    def A_dense(self) -> np.ndarray:
        return self.A.toarray()

    def with_costs(self, costs: np.ndarray) -> "MOLPInstance":
        """Copy sharing constraints and features but with different native costs."""
        return MOLPInstance(
            id=self.id, features=self.features, costs=costs, A=self.A, b=self.b,
            bounds=self.bounds, orientation=self.orientation, meta=dict(self.meta),
        )

    def check_invariants(self, tol_front: float = 1e-9, tol_feas: float = 1e-8) -> None:
        if len(self.pareto_set) != len(self.pareto_front):
            raise DimensionError("pareto_set and pareto_front differ in length")
        for pi, f in zip(self.pareto_set, self.pareto_front):
            if np.max(np.abs(evaluate_objectives(self, pi) - f)) > tol_front:
                raise ValueError(f"instance {self.id}: pareto_front entry does not match its solution")
            if not check_feasible(self, pi, tol_feas):
                raise ValueError(f"instance {self.id}: infeasible pareto_set member")


@dataclass
class FrontApproximation:
    points: np.ndarray
    orientation: str = "min"
    source: str = "true"

    def __len__(self) -> int:
        return len(self.points)


@dataclass
class Dataset:
    instances: list[MOLPInstance]
    split: dict[str, list[int]]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        seen: list[int] = []
        for idx in self.split.values():
            seen.extend(idx)
        if len(seen) != len(set(seen)):
            raise ValueError("dataset splits overlap")
        if sorted(seen) != list(range(len(self.instances))):
            raise ValueError("dataset splits must cover every instance exactly once")

    def subset(self, name: str) -> list[MOLPInstance]:
        return [self.instances[i] for i in self.split.get(name, [])]

    def __len__(self) -> int:
        return len(self.instances)


def default_split(n: int, fractions: tuple[float, float] = (0.6, 0.2)) -> dict[str, list[int]]:
    """Contiguous train/val/test split; every split gets at least one item when n >= 3."""
    n_train = max(1, int(round(fractions[0] * n))) if n >= 3 else n
    n_val = max(1, int(round(fractions[1] * n))) if n >= 3 else 0
    n_train = min(n_train, n - n_val - (1 if n >= 3 else 0))
    idx = list(range(n))
    return {"train": idx[:n_train], "val": idx[n_train:n_train + n_val], "test": idx[n_train + n_val:]}


# --------------------------------------------------------------------------
# Pareto relations
# --------------------------------------------------------------------------

def _canonical(points, orientation: str) -> np.ndarray:
    return orientation_sign(orientation) * np.asarray(points, dtype=float)


def dominates(phi: Sequence[float], psi: Sequence[float], orientation: str = "min") -> bool:
    phi = np.asarray(phi, dtype=float)
    psi = np.asarray(psi, dtype=float)
    if phi.shape != psi.shape:
        raise DimensionError(f"cannot compare vectors of shapes {phi.shape} and {psi.shape}")
    s = orientation_sign(orientation)
    a, b = s * phi, s * psi
    return bool(np.all(a <= b) and np.any(a < b))


def pareto_filter(points: Iterable[Sequence[float]], orientation: str = "min",
                  source: str = "true") -> FrontApproximation:
    """Non-dominated subset of ``points``; exact duplicates keep their first occurrence."""
    pts = np.asarray(list(points) if not isinstance(points, np.ndarray) else points, dtype=float)
    if pts.size == 0:
        raise EmptyFrontError("pareto_filter needs at least one point")
    pts = np.atleast_2d(pts)
    keep_idx = pareto_indices(pts, orientation)
    return FrontApproximation(pts[keep_idx], orientation, source)


def pareto_indices(points: np.ndarray, orientation: str = "min") -> np.ndarray:
    """Indices (in input order) of the non-dominated, de-duplicated points."""
    pts = _canonical(np.atleast_2d(points), orientation)
    k = len(pts)
    if k == 0:
        return np.zeros(0, dtype=int)
    # first occurrence of each distinct row
    _, first = np.unique(pts, axis=0, return_index=True)
    first = np.sort(first)
    cand = pts[first]
    le = np.all(cand[:, None, :] <= cand[None, :, :], axis=2)
    lt = np.any(cand[:, None, :] < cand[None, :, :], axis=2)
    dominated = np.any(le & lt, axis=0)
    return first[~dominated]


# --------------------------------------------------------------------------
# Evaluation and feasibility
# --------------------------------------------------------------------------

def evaluate_objectives(instance: MOLPInstance, pi: Sequence[float]) -> np.ndarray:
    """Objective vector ``[y^1.pi, ..., y^T.pi]`` in the native orientation."""
    pi = np.asarray(pi, dtype=float)
    if pi.shape != (instance.n_vars,):
        raise DimensionError(f"solution has shape {pi.shape}, expected ({instance.n_vars},)")
    return instance.costs @ pi


def check_feasible(instance: MOLPInstance, pi: Sequence[float], tol: float = 1e-8) -> bool:
    if tol <= 0:
        raise ValueError("tol must be positive")
    pi = np.asarray(pi, dtype=float)
    if pi.shape != (instance.n_vars,):
        raise DimensionError(f"solution has shape {pi.shape}, expected ({instance.n_vars},)")
    if instance.A.shape[0] and np.any(instance.A @ pi > instance.b + tol):
        return False
    lo, hi = instance.bounds[:, 0], instance.bounds[:, 1]
    return bool(np.all(pi >= lo - tol) and np.all(pi <= hi + tol))


# --------------------------------------------------------------------------
# JSON serialisation
# --------------------------------------------------------------------------

_REQUIRED = ("id", "n_vars", "t_objectives", "orientation", "features", "costs",
             "A", "b", "bounds", "pareto_set", "pareto_front")


def instance_to_dict(instance: MOLPInstance) -> dict:
    coo = instance.A.tocoo()
    order = np.lexsort((coo.col, coo.row))
    triplets = [[int(coo.row[k]), int(coo.col[k]), float(coo.data[k])] for k in order]
    doc = {
        "id": int(instance.id),
        "n_vars": instance.n_vars,
        "t_objectives": instance.t_objectives,
        "orientation": instance.orientation,
        "features": instance.features.tolist(),
        "costs": instance.costs.tolist(),
        "A": triplets,
        "b": instance.b.tolist(),
        "bounds": instance.bounds.tolist(),
        "pareto_set": instance.pareto_set.tolist(),
        "pareto_front": instance.pareto_front.tolist(),
    }
    if instance.meta:
        doc["meta"] = instance.meta
    return doc


def instance_from_dict(doc: dict) -> MOLPInstance:
    for name in _REQUIRED:
        if name not in doc:
            raise InstanceParseError(name, "missing")
    try:
        n = int(doc["n_vars"])
        t = int(doc["t_objectives"])
    except (TypeError, ValueError) as exc:
        raise InstanceParseError("n_vars", str(exc)) from exc

    def arr(name, shape_check=None):
        try:
            a = np.asarray(doc[name], dtype=float)
        except (TypeError, ValueError) as exc:
            raise InstanceParseError(name, f"not numeric ({exc})") from exc
        if shape_check is not None and not shape_check(a):
            raise InstanceParseError(name, f"unexpected shape {a.shape}")
        return a

    costs = arr("costs", lambda a: a.shape == (t, n))
    b = arr("b", lambda a: a.ndim == 1)
    bounds = arr("bounds", lambda a: a.shape == (n, 2))
    features = arr("features", lambda a: a.ndim == 2)
    trip = arr("A", lambda a: a.size == 0 or (a.ndim == 2 and a.shape[1] == 3))
    if trip.size:
        rows, cols = trip[:, 0].astype(int), trip[:, 1].astype(int)
        if np.any(rows < 0) or np.any(rows >= len(b)) or np.any(cols < 0) or np.any(cols >= n):
            raise InstanceParseError("A", "triplet index out of range")
        A = sp.csr_matrix((trip[:, 2], (rows, cols)), shape=(len(b), n))
    else:
        A = sp.csr_matrix((len(b), n))
    ps = arr("pareto_set", lambda a: a.size == 0 or (a.ndim == 2 and a.shape[1] == n))
    pf = arr("pareto_front", lambda a: a.size == 0 or (a.ndim == 2 and a.shape[1] == t))
    if doc["orientation"] not in ORIENTATIONS:
        raise InstanceParseError("orientation", f"must be one of {ORIENTATIONS}")
    return MOLPInstance(
        id=int(doc["id"]), features=features, costs=costs, A=A, b=b, bounds=bounds,
        orientation=doc["orientation"], pareto_set=ps, pareto_front=pf,
        meta=dict(doc.get("meta", {})),
    )


def write_instance(instance: MOLPInstance, path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(instance)))


def read_instance(path) -> MOLPInstance:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InstanceParseError("<document>", str(exc)) from exc
    if not isinstance(doc, dict):
        raise InstanceParseError("<document>", "top level must be an object")
    return instance_from_dict(doc)


def write_dataset(dataset: Dataset, directory, manifest_extra: dict | None = None) -> Path:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for inst in dataset.instances:
        name = f"instance_{inst.id:05d}.json"
        write_instance(inst, out / name)
        files.append(name)
    manifest = {"files": files, "split": dataset.split, "meta": dataset.meta}
    if manifest_extra:
        manifest.update(manifest_extra)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return out


def read_dataset(directory) -> Dataset:
    d = Path(directory)
    manifest_path = d / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"no manifest.json in {d}")
    manifest = json.loads(manifest_path.read_text())
    instances = [read_instance(d / name) for name in manifest["files"]]
    split = {k: [int(i) for i in v] for k, v in manifest["split"].items()}
    return Dataset(instances, split, manifest.get("meta", {}))
