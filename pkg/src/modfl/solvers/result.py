from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp


class SolverError(RuntimeError):
    """A sub-solve failed; carries the status and, for the IPM, a residual report."""

    def __init__(self, message: str, status: str = "error", residuals: dict | None = None):
        super().__init__(message)
        self.status = status
        self.residuals = residuals or {}


@dataclass
class LPSolution:
    primal: np.ndarray
    duals: np.ndarray  # multipliers of A x <= b
    lower_duals: np.ndarray
    upper_duals: np.ndarray
    objective_value: float
    status: str  # optimal | infeasible | unbounded | iteration_limit
    iterations: int = 0
    kkt_residual: float = 0.0

    @property
    def ok(self) -> bool:
        return self.status == "optimal"

    @classmethod
    def failed(cls, status: str, n: int, m: int, iterations: int = 0) -> "LPSolution":
        nan = np.full(n, np.nan)
        return cls(nan, np.full(m, np.nan), nan.copy(), nan.copy(), float("nan"), status, iterations)

    def raise_for_status(self) -> "LPSolution":
        if not self.ok:
            raise SolverError(f"solve failed with status {self.status!r}", self.status)
        return self


def as_dense(A, b, n: int) -> tuple[np.ndarray, np.ndarray]:
    if A is None:
        return np.zeros((0, n)), np.zeros(0)
    A = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)
    A = A.reshape(-1, n).astype(float, copy=False)
    b = np.asarray(b, dtype=float).reshape(-1)
    if A.shape[0] != b.shape[0]:
        raise ValueError(f"A has {A.shape[0]} rows but b has length {b.shape[0]}")
    return A, b


def normalize_bounds(bounds, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Default box is [0, 1] per variable, matching the instance default."""
    if bounds is None:
        return np.zeros(n), np.ones(n)
    bnd = np.asarray(bounds, dtype=float)
    if bnd.shape == (2,):
        bnd = np.tile(bnd, (n, 1))
    if bnd.shape != (n, 2):
        raise ValueError(f"bounds must have shape ({n}, 2)")
    return bnd[:, 0].copy(), bnd[:, 1].copy()
