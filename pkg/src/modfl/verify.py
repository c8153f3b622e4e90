"""Self-verification suites: gradient checks, oracle comparisons and invariants.

Each suite returns a :class:`SuiteResult`; :func:`run_all` collects them with
their runtimes. The CLI ``verify`` command and the acceptance tests both use
these functions.
"""
from __future__ import annotations

import itertools
import tempfile
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import dslp
from .core import MOLPInstance
from .losses import landscape_loss, pareto_set_loss
from .metrics import evaluate_predictor, gd, hypervolume, mpfe
from .ot_rank import sinkhorn, srmmd, srmmd_grad
from .predictor import OraclePredictor
from .scalarize import normalize_costs, uniform_weight, weight_grid, weighted_cost
from .solvers import solve_lp
from .solvers.multi import weighted_solutions


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str
    runtime_s: float = 0.0
    stats: dict = field(default_factory=dict)

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] {self.name}: {self.detail} ({self.runtime_s:.1f}s)"


def _timed(name: str, fn: Callable[[], tuple[bool, str, dict]]) -> SuiteResult:
    t0 = time.perf_counter()
    try:
        ok, detail, stats = fn()
    except Exception as exc:  # a crashing suite is a failing suite
        ok, detail, stats = False, f"error: {type(exc).__name__}: {exc}", {}
    return SuiteResult(name, bool(ok), detail, time.perf_counter() - t0, stats)


# ---------------------------------------------------------------------------
# 1. smoothed LP Jacobian
# ---------------------------------------------------------------------------

def random_lp(rng: np.random.Generator, n_max: int = 10, m_max: int = 15):
    n = int(rng.integers(2, n_max + 1))
    m = int(rng.integers(1, m_max + 1))
    A = rng.normal(size=(m, n))
    b = A @ rng.uniform(0, 1, n) + rng.uniform(0, 0.3, m)
    return rng.normal(size=n), A, b


def suite_dslp(count: int = 20, gamma: float = 0.35, step: float = 1e-5, tol: float = 1e-4,
               seed: int = 0, corrupt_sign: bool = False) -> SuiteResult:
    """Jacobian entries against central differences on random LPs.

    Columns whose perturbation changes the active set are excluded as
    degenerate. Relative error uses ``max(|FD|, |J|, 1/(2 gamma))`` as scale.
    """
    from .solvers import solve_qp_regularized

    def run():
        rng = np.random.default_rng(seed)
        worst, checked, skipped = 0.0, 0, 0
        for _ in range(count):
            c, A, b = random_lp(rng)
            n = c.size
            J = dslp.forward(c, A, b, None, gamma).jacobian
            if corrupt_sign:
                J = -J
            base = solve_qp_regularized(c, A, b, None, gamma)
            active = np.concatenate([b - A @ base.primal <= 1e-7, base.primal <= 1e-7, base.primal >= 1 - 1e-7])
            for j in range(n):
                e = np.zeros(n)
                e[j] = step
                plus = solve_qp_regularized(c + e, A, b, None, gamma)
                minus = solve_qp_regularized(c - e, A, b, None, gamma)
                same = all(
                    np.array_equal(active, np.concatenate([b - A @ s.primal <= 1e-7, s.primal <= 1e-7,
                                                           s.primal >= 1 - 1e-7]))
                    for s in (plus, minus))
                if not same:
                    skipped += 1
                    continue
                fd = (plus.primal - minus.primal) / (2 * step)
                scale = max(np.abs(fd).max(), np.abs(J[:, j]).max(), 1.0 / (2 * gamma))
                worst = max(worst, float(np.abs(fd - J[:, j]).max() / scale))
                checked += 1
        ok = worst <= tol and checked > 0
        return ok, f"{checked} columns checked, {skipped} degenerate skipped, worst rel err {worst:.2e}", {
            "worst": worst, "checked": checked, "skipped": skipped}

    return _timed("dslp_gradients", run)


# ---------------------------------------------------------------------------
# 2. sRMMD and Sinkhorn
# ---------------------------------------------------------------------------

def suite_srmmd(seed: int = 0, grad_epsilons=(1e-1, 1e-2), sinkhorn_epsilons=(1e-1, 1e-2, 1e-3, 1e-4, 1e-5)):
    def run():
        rng = np.random.default_rng(seed)
        X = rng.random((8, 2))
        Y = rng.random((8, 2)) * 0.8 + 0.1
        self_val = srmmd(X, X)
        sym = abs(srmmd(X, Y, seed=1) - srmmd(Y, X, seed=1))
        worst_grad = 0.0
        for eps in grad_epsilons:
            v, gx, gy = srmmd_grad(X, Y, epsilon=eps)
            for M, G, first in ((X, gx, True), (Y, gy, False)):
                fd = np.zeros_like(M)
                for idx in np.ndindex(M.shape):
                    d = np.zeros_like(M)
                    d[idx] = 1e-5
                    a = srmmd(X + d, Y, epsilon=eps) if first else srmmd(X, Y + d, epsilon=eps)
                    b = srmmd(X - d, Y, epsilon=eps) if first else srmmd(X, Y - d, epsilon=eps)
                    fd[idx] = (a - b) / 2e-5
                worst_grad = max(worst_grad, float(np.abs(G - fd).max() / max(np.abs(fd).max(), 1e-12)))
        worst_viol = 0.0
        for eps in sinkhorn_epsilons:
            pot = sinkhorn(X, rng.random((8, 2)), eps)
            worst_viol = max(worst_viol, pot.marginal_violation)
        ok = self_val <= 1e-8 and sym <= 1e-10 and worst_grad <= 1e-3 and worst_viol <= 1e-6
        return ok, (f"self {self_val:.1e}, symmetry {sym:.1e}, grad rel err {worst_grad:.1e}, "
                    f"max marginal violation {worst_viol:.1e}"), {
            "self": self_val, "symmetry": sym, "grad": worst_grad, "violation": worst_viol}

    return _timed("srmmd", run)


# ---------------------------------------------------------------------------
# 3. weighted-sum optima are Pareto optimal
# ---------------------------------------------------------------------------

def enumerate_vertices(A: np.ndarray, b: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """All vertices of ``{A x <= b, 0 <= x <= 1}`` by exhaustive active-set enumeration."""
    m, n = A.shape
    found = []
    for k in range(0, min(m, n) + 1):
        for S in itertools.combinations(range(m), k):
            for F in itertools.combinations(range(n), k):
                fixed = [j for j in range(n) if j not in F]
                pats = (np.array(list(itertools.product((0.0, 1.0), repeat=len(fixed))))
                        if fixed else np.zeros((1, 0)))
                X = np.zeros((len(pats), n))
                X[:, fixed] = pats
                if k:
                    AS = A[np.ix_(S, F)]
                    if abs(np.linalg.det(AS)) < 1e-12:
                        continue
                    rhs = b[list(S)][None, :] - pats @ A[np.ix_(S, fixed)].T
                    X[:, list(F)] = np.linalg.solve(AS, rhs.T).T
                ok = np.all(X @ A.T <= b + tol, axis=1) & np.all(X >= -tol, axis=1) & np.all(X <= 1 + tol, axis=1)
                found.extend(X[ok])
    V = np.array(found)
    return np.unique(np.round(V, 10), axis=0) if len(V) else V


def suite_weighted_sum(count: int = 100, seed: int = 0) -> SuiteResult:
    def run():
        rng = np.random.default_rng(seed)
        violations, checked = 0, 0
        for _ in range(count):
            n = int(rng.integers(2, 9))
            m = int(rng.integers(1, 5))
            t = int(rng.integers(2, 4))
            A = rng.uniform(0, 1, (m, n))
            b = rng.uniform(0.5, 0.5 * n, m)
            costs = rng.normal(size=(t, n))
            V = enumerate_vertices(A, b)
            FV = V @ costs.T
            weights = [w for w in weight_grid(t, 5) if np.all(w > 0)]
            for pi in weighted_solutions(costs, A, b, None, weights, center=False):
                f = costs @ pi
                checked += 1
                if any(np.all(g <= f + 1e-9) and np.any(g < f - 1e-9) for g in FV):
                    violations += 1
        return violations == 0, f"{checked} scalarised optima, {violations} dominated", {
            "violations": violations, "checked": checked}

    return _timed("weighted_sum_pareto", run)


# ---------------------------------------------------------------------------
# 4. metric oracles
# ---------------------------------------------------------------------------

def brute_gd(P, Q) -> float:
    total = 0.0
    for p in P:
        total += min(float(np.sqrt(sum((a - b) ** 2 for a, b in zip(p, q)))) for q in Q)
    return total / len(P)


def brute_mpfe(P, Q, p: float = 2.0) -> float:
    return max(min(sum(abs(a - b) ** p for a, b in zip(q, x)) ** (1.0 / p) for x in P) for q in Q)


def mc_hypervolume(front, ref, samples: int, rng) -> float:
    """Monte-Carlo dominated volume (minimisation) inside the box spanned by the front and ``ref``."""
    lo = front.min(axis=0)
    box = np.prod(ref - lo)
    U = lo + rng.random((samples, front.shape[1])) * (ref - lo)
    hit = np.zeros(samples, dtype=bool)
    for p in front:
        hit |= np.all(U >= p, axis=1)
    return float(box * hit.mean())


def suite_metrics(count: int = 50, seed: int = 0, samples: int = 1_000_000) -> SuiteResult:
    def run():
        rng = np.random.default_rng(seed)
        err_exact, err_hv = 0.0, 0.0
        for k in range(count):
            t = 2 if k % 2 == 0 else 3
            P = rng.random((int(rng.integers(1, 11)), t))
            Q = rng.random((int(rng.integers(1, 11)), t))
            err_exact = max(err_exact, abs(gd(P, Q) - brute_gd(P, Q)), abs(mpfe(P, Q) - brute_mpfe(P, Q)),
                            abs(mpfe(P, Q, 1) - brute_mpfe(P, Q, 1)))
            ref = np.full(t, 1.1)
            exact = hypervolume(P, ref)
            est = mc_hypervolume(P, ref, samples, rng)
            err_hv = max(err_hv, abs(exact - est) / exact)
        ok = err_exact <= 1e-9 and err_hv <= 5e-3
        return ok, f"GD/MPFE max abs err {err_exact:.1e}, HV max rel err vs Monte Carlo {err_hv:.2%}", {
            "exact": err_exact, "hv": err_hv}

    return _timed("metric_oracles", run)


# ---------------------------------------------------------------------------
# 5. quadratic example
# ---------------------------------------------------------------------------

def suite_quadratic(count: int = 20, seed: int = 0) -> SuiteResult:
    from .benchmarks.quadratic import QuadraticExample, grid_membership, quadratic_pareto_set

    def run():
        rng = np.random.default_rng(seed)
        err, grid_bad = 0.0, 0
        for _ in range(count):
            a1 = rng.uniform(0.5, 2.0)
            a2, a3 = rng.uniform(-2, 2, 2)
            ex = QuadraticExample(a1, a2, a3)
            ps = quadratic_pareto_set(ex)
            err = max(err, abs(ps.lower - min(a2, a3) / (2 * a1)), abs(ps.upper - max(a2, a3) / (2 * a1)))
            grid, mask = grid_membership(ex)
            inside = (grid >= ps.lower - 1e-12) & (grid <= ps.upper + 1e-12)
            grid_bad += int(np.sum(inside != mask))
        ratio = quadratic_pareto_set(QuadraticExample(1.0, 2.0, 4.0, 1, 1.0)).overlap_ratio
        ok = err <= 1e-9 and grid_bad == 0 and ratio == 0.5
        return ok, f"interval err {err:.1e}, grid mismatches {grid_bad}, overlap ratio {ratio}", {
            "err": err, "grid_bad": grid_bad, "ratio": ratio}

    return _timed("quadratic_example", run)


# ---------------------------------------------------------------------------
# 6. perfect prediction
# ---------------------------------------------------------------------------

def oracle_losses(instance: MOLPInstance) -> tuple[float, float]:
    """Landscape and Pareto-set losses of the true costs with the inference decision."""
    norm = normalize_costs(instance.canonical_costs)
    pi = solve_lp(weighted_cost(norm, uniform_weight(instance.t_objectives)),
                  instance.A, instance.b, instance.bounds).raise_for_status().primal
    l_ps, _ = pareto_set_loss(pi, instance.pareto_set)
    l_l = landscape_loss(instance, instance.costs, instance.pareto_set)[0] if len(instance.pareto_set) >= 2 else 0.0
    return l_l, l_ps


def small_datasets(seed: int = 0):
    from .benchmarks import AdAllocConfig, BipartiteConfig, gen_ad_alloc, gen_bipartite

    return {
        "bipartite": gen_bipartite(BipartiteConfig(nodes=16, instances=6, seed=seed)),
        "bipartite3": gen_bipartite(BipartiteConfig(nodes=12, instances=4, seed=seed, third_objective=True)),
        "ad_alloc": gen_ad_alloc(AdAllocConfig(nd=12, nc=8, delta=(0.3, 0.3, 0.3), thr=0.1, seed=seed), 4),
    }


def suite_perfect_prediction(seed: int = 0) -> SuiteResult:
    def run():
        worst = {"gd": 0.0, "har": 0.0, "r": 0.0, "l_l": 0.0, "l_ps": 0.0}
        per_ds, har_checked = {}, 0
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            for name, ds in small_datasets(seed).items():
                row, _ = evaluate_predictor("oracle", ds.instances, OraclePredictor())
                worst["gd"] = max(worst["gd"], row.gd)
                har_checked += row.flags["instances"] - row.flags["har_skipped"]
                if np.isfinite(row.har):
                    worst["har"] = max(worst["har"], abs(row.har - 1.0))
                worst["r"] = max(worst["r"], abs(row.r))
                ps = 0.0
                for inst in ds.instances:
                    l_l, l_ps = oracle_losses(inst)
                    worst["l_l"] = max(worst["l_l"], l_l)
                    ps = max(ps, l_ps)
                per_ds[name] = ps
                worst["l_ps"] = max(worst["l_ps"], ps)
        ok = (worst["gd"] <= 1e-6 and worst["har"] <= 1e-6 and worst["r"] <= 1e-6
              and worst["l_l"] <= 1e-6 and worst["l_ps"] <= 1e-9 and har_checked > 0)
        detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items() if k != "l_ps")
        detail += f" (HAR on {har_checked} instances with positive true HV)"
        detail += "; l_ps by dataset: " + ", ".join(f"{k} {v:.1e}" for k, v in per_ds.items())
        return ok, detail, {**worst, "l_ps_by_dataset": per_ds, "har_checked": har_checked}

    return _timed("perfect_prediction", run)


# ---------------------------------------------------------------------------
# 7. MoDFL versus TwoStage
# ---------------------------------------------------------------------------

def e2e_seed(seed: int, nodes: int = 40, instances: int = 10, max_epochs: int = 50) -> dict:
    from .benchmarks import BipartiteConfig, gen_bipartite
    from .predictor import NetworkPredictor
    from .trainer import TrainConfig, train_modfl, train_twostage

    ds = gen_bipartite(BipartiteConfig(nodes=nodes, instances=instances, seed=seed))
    test = ds.subset("test")
    cfg = TrainConfig(seed=seed, max_epochs=max_epochs)
    out = {}
    for name, fn in (("twostage", train_twostage), ("modfl", train_modfl)):
        res = fn(ds, cfg)
        row, _ = evaluate_predictor(name, test, NetworkPredictor(res.params))
        out[name] = row.r
    return out


def suite_e2e(seeds=(0, 1, 2, 3, 4), budget_s: float = 600.0) -> SuiteResult:
    def run():
        wins, rows = 0, []
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            for s in seeds:
                r = e2e_seed(s)
                rows.append(r)
                wins += r["modfl"] <= r["twostage"]
        need = -(-3 * len(seeds) // 5)  # 3 of 5
        detail = "; ".join(f"seed {s}: modfl {r['modfl']:.3f} vs twostage {r['twostage']:.3f}"
                           for s, r in zip(seeds, rows))
        return wins >= need, f"MoDFL regret <= TwoStage in {wins}/{len(seeds)} seeds ({detail})", {
            "wins": wins, "rows": rows}

    res = _timed("e2e_directional", run)
    if res.passed and res.runtime_s > budget_s:
        res.passed = False
        res.detail += f"; over the {budget_s:.0f}s budget"
    return res


# ---------------------------------------------------------------------------
# 8. integrality
# ---------------------------------------------------------------------------

def suite_integrality(seed: int = 0) -> SuiteResult:
    def run():
        worst, count = 0.0, 0
        for name, ds in small_datasets(seed).items():
            for inst in ds.instances:
                rng = np.random.default_rng(inst.id)
                for costs in (inst.costs, rng.random(inst.costs.shape)):
                    c = weighted_cost(normalize_costs(inst.sign * costs), uniform_weight(inst.t_objectives))
                    pi = solve_lp(c, inst.A, inst.b, inst.bounds).raise_for_status().primal
                    worst = max(worst, float(np.abs(pi - np.round(pi)).max()))
                    count += 1
                if len(inst.pareto_set):
                    worst = max(worst, float(np.abs(inst.pareto_set - np.round(inst.pareto_set)).max()))
        return worst <= 1e-7, f"{count} inference solves, max distance to integers {worst:.1e}", {"worst": worst}

    return _timed("integrality", run)


# ---------------------------------------------------------------------------
# 9. determinism
# ---------------------------------------------------------------------------

def suite_determinism(seed: int = 3) -> SuiteResult:
    from .cli import main
    from .trainer import read_log

    def run():
        with tempfile.TemporaryDirectory() as tmp:
            tmp = Path(tmp)
            data = tmp / "data"
            if main(["generate", "--benchmark", "bipartite", "--instances", "5", "--nodes", "12",
                     "--seed", str(seed), "--out", str(data)]) != 0:
                return False, "dataset generation failed", {}
            logs = []
            for k in range(2):
                out = tmp / f"run{k}"
                code = main(["train", "--dataset", str(data), "--method", "modfl", "--seed", str(seed),
                             "--max-epochs", "3", "--trunk-sizes", "16", "16", "--head-sizes", "16",
                             "--out", str(out)])
                if code != 0:
                    return False, f"training run {k} exited with {code}", {}
                logs.append([{k2: v for k2, v in rec.items() if k2 != "wall_time_s"}
                             for rec in read_log(out / "train_log.jsonl")])
        same = logs[0] == logs[1]
        return same, f"{len(logs[0])} epoch records, identical: {same}", {}

    return _timed("determinism", run)


SUITES = {
    "dslp_gradients": suite_dslp,
    "srmmd": suite_srmmd,
    "weighted_sum_pareto": suite_weighted_sum,
    "metric_oracles": suite_metrics,
    "quadratic_example": suite_quadratic,
    "perfect_prediction": suite_perfect_prediction,
    "e2e_directional": suite_e2e,
    "integrality": suite_integrality,
    "determinism": suite_determinism,
}


def run_all(skip=(), corrupt_dslp_sign: bool = False) -> list[SuiteResult]:
    results = []
    for name, fn in SUITES.items():
        if name in skip:
            continue
        results.append(fn(corrupt_sign=True) if (name == "dslp_gradients" and corrupt_dslp_sign) else fn())
    return results
