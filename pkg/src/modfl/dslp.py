"""Differentiable solution map of a smoothed LP.

The forward pass solves ``min c.pi + gamma ||pi||^2`` over the instance
polytope. Writing bounds as extra rows, the optimum satisfies
``c + 2 gamma pi + G^T mu = 0`` with ``mu >= 0`` complementary to the
slacks ``h - G pi``. Differentiating those conditions with respect to ``c``
on the active set gives the Jacobian used in the backward pass.

Constraints are classified with a 1e-7 threshold on slack and multiplier:

* slack above and multiplier below the threshold: inactive, dropped;
* slack below and multiplier above: strongly active, ``g . dpi = 0``;
* anything else keeps the complementarity row ``mu g . dpi = s dmu`` with
  the slack damped by 1e-8 when both quantities are near zero.

Eliminating ``dmu`` for the non-strong rows gives ``H = 2 gamma I + G_W^T D G_W``
and the strongly active rows are handled by a range-space projection, so
``J = -(H^-1 - H^-1 E^T (E H^-1 E^T)^+ E H^-1)``. The matrix is symmetric.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .solvers import solve_lp, solve_qp_regularized
from .solvers.result import as_dense, normalize_bounds

ACTIVE_TOL = 1e-7
DAMPING = 1e-8


class DSLPError(RuntimeError):
    def __init__(self, message: str, condition: float):
        super().__init__(f"{message} (condition estimate {condition:.3e})")
        self.condition = condition


@dataclass
class DiffSolution:
    primal: np.ndarray
    duals: np.ndarray  # row multipliers
    jacobian: np.ndarray | None
    gamma: float
    active: dict = field(default_factory=dict)  # counts per constraint class
    kkt_residual: float = 0.0


def _constraint_rows(A, b, lo, hi):
    n = lo.size
    fl, fu = np.flatnonzero(np.isfinite(lo)), np.flatnonzero(np.isfinite(hi))
    eye = np.eye(n)
    G = np.vstack([A, -eye[fl], eye[fu]])
    h = np.concatenate([b, -lo[fl], hi[fu]])
    return G, h, fl, fu


def kkt_jacobian(pi, lam, zl, zu, A, b, lo, hi, gamma: float) -> tuple[np.ndarray, dict]:
    """``d pi / d c`` at a solution of the smoothed LP."""
    n = pi.size
    G, h, fl, fu = _constraint_rows(A, b, lo, hi)
    mu = np.concatenate([lam, zl[fl], zu[fu]])
    slack = h - G @ pi
    near_s = slack <= ACTIVE_TOL
    big_mu = mu >= ACTIVE_TOL
    strong = near_s & big_mu
    inactive = ~near_s & ~big_mu
    ambiguous = near_s & ~big_mu
    other = ~strong & ~inactive
    D = np.zeros(G.shape[0])
    D[other] = mu[other] / (np.maximum(slack[other], 0.0) + np.where(ambiguous[other], DAMPING, 0.0))

    # bound rows that are strongly active pin their variable
    m = A.shape[0]
    pinned = np.zeros(n, dtype=bool)
    bound_rows = np.arange(m, G.shape[0])
    bound_var = np.concatenate([fl, fu])
    pinned[bound_var[strong[bound_rows]]] = True
    F = ~pinned

    H = G[other][:, F].T @ (D[other][:, None] * G[other][:, F])
    H[np.diag_indices_from(H)] += 2.0 * gamma
    E = G[strong][:, F]
    E = E[np.any(E != 0, axis=1)]
    cond = float(np.linalg.cond(H)) if H.size else 1.0
    if not np.isfinite(cond) or cond > 1e14:
        raise DSLPError("KKT system is singular after damping", cond)
    Hinv = np.linalg.inv(H)
    JF = Hinv
    if E.shape[0]:
        EH = E @ Hinv
        JF = Hinv - EH.T @ np.linalg.pinv(EH @ E.T, rcond=1e-10, hermitian=True) @ EH
    J = np.zeros((n, n))
    J[np.ix_(F, F)] = -0.5 * (JF + JF.T)
    if not np.all(np.isfinite(J)):
        raise DSLPError("non-finite Jacobian", cond)
    counts = {"strong": int(strong.sum()), "inactive": int(inactive.sum()),
              "ambiguous": int(ambiguous.sum()), "pinned": int(pinned.sum())}
    return J, counts


def forward(c, A=None, b=None, bounds=None, gamma: float = 0.35, *, jacobian: bool = True) -> DiffSolution:
    """Solve the smoothed problem and, optionally, its Jacobian.

    ``gamma == 0`` is inference mode: the plain LP is solved by simplex and
    no derivative information is produced.
    """
    c = np.asarray(c, dtype=float).reshape(-1)
    n = c.size
    if gamma == 0:
        sol = solve_lp(c, A, b, bounds).raise_for_status()
        return DiffSolution(sol.primal, sol.duals, None, 0.0)
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    Ad, bd = as_dense(A, b, n)
    lo, hi = normalize_bounds(bounds, n)
    sol = solve_qp_regularized(c, Ad, bd, np.column_stack([lo, hi]), gamma)
    J, counts = (None, {})
    if jacobian:
        J, counts = kkt_jacobian(sol.primal, sol.duals, sol.lower_duals, sol.upper_duals, Ad, bd, lo, hi, gamma)
    return DiffSolution(sol.primal, sol.duals, J, gamma, counts, sol.kkt_residual)


def backward(diff: DiffSolution, grad_out) -> np.ndarray:
    """``grad_out^T d pi / d c``."""
    if diff.jacobian is None:
        raise ValueError("no Jacobian: forward ran in inference mode or with jacobian=False")
    g = np.asarray(grad_out, dtype=float).reshape(-1)
    if g.size != diff.jacobian.shape[0]:
        raise ValueError(f"grad_out has length {g.size}, expected {diff.jacobian.shape[0]}")
    return diff.jacobian.T @ g


def dslp_layer(c: ad.Var, A, b, bounds, gamma: float) -> tuple[ad.Var, DiffSolution]:
    """Record the layer on an autodiff tape; returns ``pi_hat`` and the raw solution."""
    diff = forward(c.value, A, b, bounds, gamma)
    out = ad.custom([c], diff.primal, [lambda g: backward(diff, g)], name="dslp")
    return out, diff
