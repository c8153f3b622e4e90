"""Solver for ``min c.x + gamma ||x||^2`` over ``{A x <= b, lo <= x <= hi}``.

The main work is a Mehrotra predictor-corrector interior point method with
explicit slacks for the rows and for every finite variable bound. Its
multipliers warm-start a projected Newton method on the dual, where the box
is handled in closed form by clipping; this recovers the exact piece of the
piecewise-quadratic dual and brings KKT residuals down to rounding level.
Degenerate cases the Newton finish cannot settle go to a Goldfarb-Idnani
dual active-set method, which is exact in finitely many steps.
"""
from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from .result import LPSolution, SolverError, as_dense, normalize_bounds


def _max_step(v: np.ndarray, dv: np.ndarray) -> float:
    neg = dv < 0
    if not np.any(neg):
        return np.inf
    return float(np.min(-v[neg] / dv[neg]))


def kkt_residual(sol: LPSolution, c, A, b, lo, hi, gamma: float) -> dict:
    x = sol.primal
    stat = 2 * gamma * x + c + A.T @ sol.duals - sol.lower_duals + sol.upper_duals
    slack = b - A @ x
    return {
        "stationarity": float(np.max(np.abs(stat), initial=0.0)),
        "primal": float(max(np.max(-slack, initial=0.0), np.max(lo - x, initial=0.0), np.max(x - hi, initial=0.0))),
        "complementarity": float(max(
            np.max(np.abs(sol.duals * slack), initial=0.0),
            np.max(np.abs(sol.lower_duals * np.where(np.isfinite(lo), x - lo, 0.0)), initial=0.0),
            np.max(np.abs(sol.upper_duals * np.where(np.isfinite(hi), hi - x, 0.0)), initial=0.0),
        )),
        "dual": float(-min(np.min(sol.duals, initial=0.0), np.min(sol.lower_duals, initial=0.0),
                           np.min(sol.upper_duals, initial=0.0))),
    }


def _from_dual(c, A, lo, hi, gamma, lam):
    """Primal point and bound multipliers implied by row multipliers ``lam``."""
    q = 2.0 * gamma
    u = -(c + A.T @ lam) / q
    x = np.clip(u, lo, hi)
    gap = q * (x - u)
    return x, np.maximum(gap, 0.0), np.maximum(-gap, 0.0), u


def _dual_newton(c, A, b, lo, hi, gamma, lam, max_iter: int = 50):
    """Projected Newton ascent on the dual ``max_{lam >= 0} psi(lam)``.

    ``psi`` is concave and piecewise quadratic with gradient ``A x(lam) - b``;
    the binding set is chosen as in Bertsekas' projected Newton method.
    """
    q = 2.0 * gamma
    scale = 1.0 + np.abs(c).max(initial=0.0) + np.abs(b).max(initial=0.0)

    def state(lam):
        x, _, _, u = _from_dual(c, A, lo, hi, gamma, lam)
        f = -(c @ x + gamma * x @ x + lam @ (A @ x - b))
        return u, x, f, b - A @ x

    lam = np.maximum(lam, 0.0)
    u, x, f, g = state(lam)
    for _ in range(max_iter):
        err = np.abs(lam - np.maximum(lam - g, 0.0)).max(initial=0.0)
        if err <= 1e-13 * scale:
            break
        I = (lam <= min(1e-6, err)) & (g > 0)
        N = ~I
        free = (u > lo) & (u < hi)
        AN = A[N][:, free]
        H = AN @ AN.T / q
        H[np.diag_indices_from(H)] += 1e-12 * scale + 1e-2 * min(1e-3, err)
        d = np.zeros_like(lam)
        d[N] = -np.linalg.solve(H, g[N])
        d[I] = -g[I]
        alpha = 1.0
        while True:
            nl = np.maximum(lam + alpha * d, 0.0)
            nu, nx, nf, ng = state(nl)
            dec = g @ (lam - nl)
            if nf <= f - 1e-4 * dec or alpha < 1e-10:
                break
            alpha *= 0.5
        lam, u, x, f, g = nl, nu, nx, nf, ng
    return lam


def _goldfarb_idnani(c, N, h, gamma, tol: float = 1e-12):
    """Dual active-set method for ``min c.x + gamma ||x||^2`` s.t. ``N x <= h``.

    Starts from the unconstrained minimiser and adds the most violated
    constraint each round, dropping constraints whose multiplier would turn
    negative. ``J`` and ``R`` hold the factorisation ``J^T N_act = [R; 0]``
    with ``J J^T`` the inverse Hessian. Returns ``(x, multipliers, status)``.
    """
    n, mc = c.size, N.shape[0]
    q = 2.0 * gamma
    x = -c / q
    J = np.eye(n) / np.sqrt(q)
    R = np.zeros((n, n))
    act: list[int] = []
    u = np.zeros(0)
    nrm = 1.0 + np.linalg.norm(N, axis=1)
    budget = 10 * (n + mc)

    def add(d):
        k = len(act)
        d2 = d[k:]
        nd = np.linalg.norm(d2)
        sg = 1.0 if d2[0] >= 0 else -1.0
        v = d2.copy()
        v[0] += sg * nd
        vv = v @ v
        if vv > 0:
            J[:, k:] -= np.outer(J[:, k:] @ v, v * (2.0 / vv))
        R[:k, k] = d[:k]
        R[k, k] = -sg * nd

    def drop(k):
        qa = len(act)
        del act[k]
        R[:, k:qa - 1] = R[:, k + 1:qa]
        R[:, qa - 1] = 0.0
        if k < qa - 1:
            # restore triangular form of the Hessenberg block
            Q, _ = np.linalg.qr(R[k:qa, k:qa - 1], mode="complete")
            R[k:qa, k:qa - 1] = Q.T @ R[k:qa, k:qa - 1]
            J[:, k:qa] = J[:, k:qa] @ Q
            blk = R[k:qa, k:qa - 1]
            blk[np.tril_indices(blk.shape[0], -1, blk.shape[1])] = 0.0
        R[qa - 1, :] = 0.0

    def result(status):
        lam = np.zeros(mc)
        lam[act] = u
        return x, lam, status

    while mc:
        viol = (N @ x - h) / nrm
        viol[act] = -np.inf
        p = int(np.argmax(viol))
        if viol[p] <= tol:
            break
        a = -N[p]
        up = 0.0
        while True:
            budget -= 1
            if budget < 0:
                return result("iteration_limit")
            k = len(act)
            d = J.T @ a
            z = J[:, k:] @ d[k:]
            r = sla.solve_triangular(R[:k, :k], d[:k]) if k else np.zeros(0)
            t1, drop_at = np.inf, -1
            pos = r > 1e-12 * (1.0 + np.abs(r).max(initial=0.0))
            if np.any(pos):
                ratios = np.full(k, np.inf)
                ratios[pos] = u[pos] / r[pos]
                drop_at = int(np.argmin(ratios))
                t1 = ratios[drop_at]
            zn = z @ a
            t2 = -(a @ x + h[p]) / zn if zn > 1e-12 * (a @ a) / q else np.inf
            t = min(t1, t2)
            if not np.isfinite(t):
                return result("infeasible")
            if np.isfinite(t2):
                x = x + t * z
            u = u - t * r
            up += t
            if t == t2:
                add(d)
                act.append(p)
                u = np.append(u, up)
                break
            u = np.delete(u, drop_at)
            drop(drop_at)
    return result("optimal")


def solve_qp_regularized(c, A=None, b=None, bounds=None, gamma: float = 0.35, *,
                         max_iter: int = 100, tol: float = 1e-10, polish: bool = True) -> LPSolution:
    """Minimise ``c.x + gamma ||x||^2`` subject to ``A x <= b`` and variable bounds."""
    if gamma <= 0:
        raise ValueError("gamma must be positive for the regularised QP")
    c = np.asarray(c, dtype=float).reshape(-1)
    n = c.shape[0]
    A, b = as_dense(A, b, n)
    lo, hi = normalize_bounds(bounds, n)
    m = A.shape[0]
    L = np.isfinite(lo)
    U = np.isfinite(hi)
    q = 2.0 * gamma

    x = np.zeros(n)
    both = L & U
    x[both] = 0.5 * (lo[both] + hi[both])
    x[L & ~U] = lo[L & ~U] + 1.0
    x[U & ~L] = hi[U & ~L] - 1.0
    s = np.maximum(b - A @ x, 1.0)
    lam = np.ones(m)
    tl = np.maximum(x[L] - lo[L], 1.0)
    tu = np.maximum(hi[U] - x[U], 1.0)
    zl = np.ones(tl.size)
    zu = np.ones(tu.size)
    ncomp = m + tl.size + tu.size

    scale_c = 1.0 + np.abs(c).max(initial=0.0)
    scale_b = 1.0 + max(np.abs(b).max(initial=0.0), np.abs(lo[L]).max(initial=0.0), np.abs(hi[U]).max(initial=0.0))

    def residuals():
        zfull = np.zeros(n)
        zfull[L] -= zl
        zfull[U] += zu
        rd = q * x + c + A.T @ lam + zfull
        rp = A @ x + s - b
        rl = x[L] - tl - lo[L]
        ru = x[U] + tu - hi[U]
        return rd, rp, rl, ru

    def factor():
        diag = np.full(n, q)
        diag[L] += zl / tl
        diag[U] += zu / tu
        H = A.T @ ((lam / s)[:, None] * A)
        H[np.diag_indices(n)] += diag
        return sla.cho_factor(H)

    def newton(fac, rd, rp, rl, ru, rs, rtl, rtu):
        rhs = -rd - A.T @ ((-rs + lam * rp) / s)
        rhs[L] += (-rtl - zl * rl) / tl
        rhs[U] -= (-rtu + zu * ru) / tu
        dx = sla.cho_solve(fac, rhs)
        ds = -rp - A @ dx
        dlam = (-rs - lam * ds) / s
        dtl = dx[L] + rl
        dzl = (-rtl - zl * dtl) / tl
        dtu = -ru - dx[U]
        dzu = (-rtu - zu * dtu) / tu
        return dx, ds, dlam, dtl, dzl, dtu, dzu

    it = 0
    converged = ncomp == 0
    best = (np.inf,)
    if ncomp == 0:
        x = -c / q
    while not converged:
        rd, rp, rl, ru = residuals()
        mu = (s @ lam + tl @ zl + tu @ zu) / ncomp
        pres = max(np.abs(rp).max(initial=0.0), np.abs(rl).max(initial=0.0), np.abs(ru).max(initial=0.0))
        merit = max(np.abs(rd).max(initial=0.0) / scale_c, pres / scale_b, mu)
        if merit < best[0]:
            best = (merit, x.copy(), s.copy(), lam.copy(), tl.copy(), zl.copy(), tu.copy(), zu.copy())
        if merit <= tol:
            converged = True
            break
        if it >= max_iter:
            break
        it += 1
        try:
            fac = factor()
            aff = newton(fac, rd, rp, rl, ru, s * lam, tl * zl, tu * zu)
        except np.linalg.LinAlgError:
            break
        dx, ds, dlam, dtl, dzl, dtu, dzu = aff
        a_aff = min(1.0, _max_step(s, ds), _max_step(lam, dlam), _max_step(tl, dtl),
                    _max_step(zl, dzl), _max_step(tu, dtu), _max_step(zu, dzu))
        mu_aff = ((s + a_aff * ds) @ (lam + a_aff * dlam) + (tl + a_aff * dtl) @ (zl + a_aff * dzl)
                  + (tu + a_aff * dtu) @ (zu + a_aff * dzu)) / ncomp
        sigma = (mu_aff / mu) ** 3
        cor = newton(fac, rd, rp, rl, ru,
                     s * lam + ds * dlam - sigma * mu,
                     tl * zl + dtl * dzl - sigma * mu,
                     tu * zu + dtu * dzu - sigma * mu)
        dx, ds, dlam, dtl, dzl, dtu, dzu = cor
        a_max = min(_max_step(s, ds), _max_step(lam, dlam), _max_step(tl, dtl),
                    _max_step(zl, dzl), _max_step(tu, dtu), _max_step(zu, dzu))
        alpha = min(1.0, 0.995 * a_max)
        x += alpha * dx
        s += alpha * ds
        lam += alpha * dlam
        tl += alpha * dtl
        zl += alpha * dzl
        tu += alpha * dtu
        zu += alpha * dzu

    if not converged and len(best) > 1:
        # the normal equations lose accuracy near the end; keep the best iterate seen
        _, x, s, lam, tl, zl, tu, zu = best
    lower_duals = np.zeros(n)
    upper_duals = np.zeros(n)
    lower_duals[L] = zl
    upper_duals[U] = zu
    sol = LPSolution(x.copy(), lam.copy(), lower_duals, upper_duals,
                     float(c @ x + gamma * x @ x), "optimal", it)
    res = kkt_residual(sol, c, A, b, lo, hi, gamma)

    def candidate(lam_rows, iters):
        px, pzl, pzu, _ = _from_dual(c, A, lo, hi, gamma, lam_rows)
        cand = LPSolution(px, lam_rows, pzl, pzu, float(c @ px + gamma * px @ px), "optimal", iters)
        return cand, kkt_residual(cand, c, A, b, lo, hi, gamma)

    if polish:
        cand, cres = candidate(_dual_newton(c, A, b, lo, hi, gamma, lam), it)
        if max(cres.values()) < max(res.values()):
            sol, res = cand, cres
        if max(res.values()) > 1e-13 * scale_c:
            # degenerate dual: finish with the exact active-set method
            fl, fu = np.flatnonzero(L), np.flatnonzero(U)
            N = np.vstack([A, -np.eye(n)[fl], np.eye(n)[fu]])
            h = np.concatenate([b, -lo[fl], hi[fu]])
            _, mult, status = _goldfarb_idnani(c, N, h, gamma)
            if status == "optimal":
                cand, cres = candidate(mult[:m], it)
                if max(cres.values()) < max(res.values()):
                    sol, res = cand, cres
    sol.kkt_residual = max(res.values())
    if sol.kkt_residual > 1e-8:
        raise SolverError(f"regularised QP not solved to tolerance after {it} interior point iterations "
                          f"(converged={converged})", "iteration_limit", res)
    return sol
