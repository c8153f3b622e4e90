"""Dense bounded-variable primal simplex (two phase).

Solves ``min c.x  s.t.  A x <= b,  lo <= x <= hi`` with finite ``lo``. Pricing
is Dantzig's largest reduced cost with the smallest index winning ties; after
a run of degenerate pivots the solver falls back to Bland's rule until it
makes progress again, which rules out cycling. Everything is deterministic.
"""
from __future__ import annotations

import numpy as np

from .result import LPSolution, as_dense, normalize_bounds

_PIVOT_TOL = 1e-11
_COST_TOL = 1e-10
_DEGENERATE_RUN = 30


def solve_lp(c, A=None, b=None, bounds=None, *, max_iter: int = 100_000) -> LPSolution:
    c = np.asarray(c, dtype=float).reshape(-1)
    n = c.shape[0]
    A, b = as_dense(A, b, n)
    lo, hi = normalize_bounds(bounds, n)
    if np.any(~np.isfinite(lo)):
        raise ValueError("solve_lp requires finite lower bounds")
    m = A.shape[0]
    ub_x = hi - lo
    if np.any(ub_x < 0):
        return LPSolution.failed("infeasible", n, m)

    rhs = b - A @ lo
    flip = rhs < 0
    d_sign = np.where(flip, -1.0, 1.0)
    art_rows = np.flatnonzero(flip)
    k = art_rows.size
    ncol = n + m + k
    M = np.zeros((m, ncol))
    M[:, :n] = d_sign[:, None] * A
    M[np.arange(m), n + np.arange(m)] = d_sign
    M[art_rows, n + m + np.arange(k)] = 1.0
    rhs = d_sign * rhs

    ub = np.concatenate([ub_x, np.full(m, np.inf), np.full(k, np.inf)])
    basis = np.where(flip, n + m + np.searchsorted(art_rows, np.arange(m)), n + np.arange(m))
    at_upper = np.zeros(ncol, dtype=bool)
    is_basic = np.zeros(ncol, dtype=bool)
    is_basic[basis] = True
    T = M.copy()
    xB = rhs.copy()
    iters = 0

    def run(cost: np.ndarray) -> str:
        nonlocal T, xB, iters
        d = cost - cost[basis] @ T
        degenerate = 0
        while True:
            if iters >= max_iter:
                return "iteration_limit"
            movable = (~is_basic) & (ub > 0)
            elig = movable & (((~at_upper) & (d < -_COST_TOL)) | (at_upper & (d > _COST_TOL)))
            cand = np.flatnonzero(elig)
            if cand.size == 0:
                return "optimal"
            if degenerate >= _DEGENERATE_RUN:
                j = int(cand[0])
            else:
                j = int(cand[np.argmax(np.abs(d[cand]))])
            iters += 1
            sigma = -1.0 if at_upper[j] else 1.0
            delta = -sigma * T[:, j]
            ubB = ub[basis]
            ratio = np.full(m, np.inf)
            dec = delta < -_PIVOT_TOL
            ratio[dec] = np.maximum(xB[dec], 0.0) / -delta[dec]
            inc = (delta > _PIVOT_TOL) & np.isfinite(ubB)
            ratio[inc] = np.maximum(ubB[inc] - xB[inc], 0.0) / delta[inc]
            t_rows = ratio.min() if m else np.inf
            t_flip = ub[j]
            if not np.isfinite(t_rows) and not np.isfinite(t_flip):
                return "unbounded"
            if t_flip <= t_rows:
                xB = xB + delta * t_flip
                at_upper[j] = not at_upper[j]
                degenerate = 0
                continue
            ties = np.flatnonzero(ratio <= t_rows + 1e-12)
            r = int(ties[np.argmin(basis[ties])])
            leaving = basis[r]
            hit_upper = delta[r] > 0
            xB = xB + delta * t_rows
            enter_val = t_rows if sigma > 0 else ub[j] - t_rows
            piv = T[r, j]
            T[r] /= piv
            col = T[:, j].copy()
            col[r] = 0.0
            T -= np.outer(col, T[r])
            d = d - d[j] * T[r]
            basis[r] = j
            xB[r] = enter_val
            is_basic[j] = True
            is_basic[leaving] = False
            at_upper[j] = False
            at_upper[leaving] = bool(hit_upper)
            degenerate = degenerate + 1 if t_rows < 1e-12 else 0

    if k:
        phase1 = np.zeros(ncol)
        phase1[n + m:] = 1.0
        status = run(phase1)
        if status != "optimal":
            return LPSolution.failed(status, n, m, iterations=iters)
        infeas = xB[basis >= n + m].sum()
        if infeas > 1e-8 * max(1.0, np.abs(rhs).max()):
            return LPSolution.failed("infeasible", n, m, iterations=iters)
        ub[n + m:] = 0.0
        at_upper[n + m:] = False

    cost = np.concatenate([c, np.zeros(m + k)])
    status = run(cost)
    if status != "optimal":
        return LPSolution.failed(status, n, m, iterations=iters)

    # Re-solve the final basis against the original columns for accuracy.
    x = np.where(at_upper, ub, 0.0)
    x[~np.isfinite(x)] = 0.0
    x[basis] = 0.0
    B = M[:, basis]
    if m:
        x[basis] = np.linalg.solve(B, rhs - M @ x)
        y = np.linalg.solve(B.T, cost[basis])
    else:
        y = np.zeros(0)
    d = cost - M.T @ y
    primal = lo + x[:n]
    primal = np.clip(primal, lo, hi)
    duals = np.maximum(d[n:n + m], 0.0)
    nonbasic = ~is_basic[:n]
    lower_duals = np.where(nonbasic & ~at_upper[:n], np.maximum(d[:n], 0.0), 0.0)
    upper_duals = np.where(nonbasic & at_upper[:n], np.maximum(-d[:n], 0.0), 0.0)
    return LPSolution(
        primal=primal, duals=duals, lower_duals=lower_duals, upper_duals=upper_duals,
        objective_value=float(c @ primal), status="optimal", iterations=iters,
    )
