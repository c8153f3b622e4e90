"""Entropic optimal transport, soft rank maps and the sRMMD statistic.

Everything runs in the log domain. With cost ``C_ij = |x_i - y_j|^2 / 2``,
source weights ``a`` and target weights ``b``, one Sinkhorn sweep is

    f_i = -eps * LSE_j(log b_j + (g_j - C_ij) / eps)
    g_j = -eps * LSE_i(log a_i + (f_i - C_ij) / eps)

and the coupling is ``P_ij = a_i b_j exp((f_i + g_j - C_ij) / eps)``.
Small targets such as ``eps = 1e-5`` are reached by annealing: ``eps`` starts
at 0.1 and drops by a decade per stage with the potentials carried over.

The soft rank map of a sample maps a point ``x`` to the softmax-weighted
average of uniform target samples ``psi_j`` with logits
``(g_j - |x - psi_j|^2 / 2) / eps``. sRMMD fits one such map on the pooled
(mixture) sample and returns the kernel MMD^2 between the mapped sets.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import autodiff as ad

BANDWIDTHS = (1.0, 2.0, 4.0, 8.0, 16.0, 32.0)


class OTInputError(ValueError):
    """Raised for NaN or mis-shaped transport inputs."""


@dataclass(frozen=True)
class KernelSpec:
    bandwidths: tuple[float, ...] = BANDWIDTHS

    def __post_init__(self):
        if not self.bandwidths or min(self.bandwidths) <= 0:
            raise ValueError("bandwidths must be positive")


@dataclass
class EntropicPotentials:
    u: np.ndarray  # source potential f
    v: np.ndarray  # target potential g
    epsilon: float
    iterations: int
    marginal_violation: float
    converged: bool
    a: np.ndarray = field(repr=False, default=None)
    b: np.ndarray = field(repr=False, default=None)

    def coupling(self, source, target) -> np.ndarray:
        C = half_sq_cost(source, target)
        return np.exp(np.log(self.a)[:, None] + np.log(self.b)[None, :]
                      + (self.u[:, None] + self.v[None, :] - C) / self.epsilon)


@dataclass
class SoftRankMap:
    target_samples: np.ndarray
    v: np.ndarray
    epsilon: float

    def __call__(self, phi) -> np.ndarray:
        return soft_rank(self, phi)


def half_sq_cost(x, y) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    d = x[:, None, :] - y[None, :, :]
    return 0.5 * np.einsum("ijk,ijk->ij", d, d)


def annealing_schedule(epsilon: float, start: float = 1e-1) -> list[float]:
    """Decade steps from ``start`` down to (and ending at) ``epsilon``."""
    stages = []
    e = start
    while e > epsilon * (1 + 1e-9):
        stages.append(e)
        e /= 10.0
    stages.append(epsilon)
    return stages


def _check_points(*arrays):
    for arr in arrays:
        if arr.size == 0:
            raise OTInputError("point sets must be nonempty")
        if not np.all(np.isfinite(arr)):
            raise OTInputError("point sets must not contain NaN or infinite values")


def _marginal_violation(f, g, C, loga, logb, eps) -> float:
    logP = loga[:, None] + logb[None, :] + (f[:, None] + g[None, :] - C) / eps
    rows = np.exp(logsumexp(logP, axis=1))
    cols = np.exp(logsumexp(logP, axis=0))
    return float(max(np.abs(rows - np.exp(loga)).max(), np.abs(cols - np.exp(logb)).max()))


def _semidual_newton(g, C, loga, logb, eps, tol, max_iter: int = 50):
    """Newton ascent on the semi-dual in ``g`` (``f`` eliminated in closed form).

    Used to finish a stage when plain sweeps stall near ties; the gradient
    is the column-marginal defect and the Hessian is
    ``-(diag(col) - P^T diag(1/row) P) / eps``.
    """
    def state(g):
        z = logb[None, :] + (g[None, :] - C) / eps
        f = -eps * logsumexp(z, axis=1)
        logP = loga[:, None] + (f[:, None] + g[None, :] - C) / eps + logb[None, :]
        obj = float(np.exp(loga) @ f + np.exp(logb) @ g)
        return f, np.exp(logP), obj

    f, P, obj = state(g)
    b = np.exp(logb)
    for _ in range(max_iter):
        col = P.sum(axis=0)
        grad = b - col
        if np.abs(grad).max() <= 0.1 * tol:
            break
        row = P.sum(axis=1)
        H = (np.diag(col) - P.T @ (P / row[:, None])) / eps
        H[np.diag_indices_from(H)] += 1e-12 / eps
        step = np.linalg.lstsq(H, grad, rcond=1e-13)[0]
        step -= step.mean()
        t = 1.0
        while t > 1e-8:
            nf, nP, nobj = state(g + t * step)
            if nobj >= obj - 1e-15 * abs(obj):
                break
            t *= 0.5
        else:
            break
        g = g + t * step
        f, P, obj = nf, nP, nobj
    return f, g


def sinkhorn(source, target, epsilon: float, max_iter: int = 2000, tol: float = 1e-6, *,
             a=None, b=None, anneal: bool = True, check_every: int = 10) -> EntropicPotentials:
    """Log-domain Sinkhorn between two point clouds with uniform (or given) weights.

    Each annealing stage gets a bounded number of sweeps; if the final stage
    has not reached ``tol`` the potentials are finished by Newton steps on
    the semi-dual. ``iterations`` counts the sweeps.
    """
    x = np.atleast_2d(np.asarray(source, dtype=float))
    y = np.atleast_2d(np.asarray(target, dtype=float))
    _check_points(x, y)
    a = np.full(len(x), 1.0 / len(x)) if a is None else np.asarray(a, dtype=float)
    b = np.full(len(y), 1.0 / len(y)) if b is None else np.asarray(b, dtype=float)
    loga, logb = np.log(a), np.log(b)
    C = half_sq_cost(x, y)
    f = np.zeros(len(x))
    g = np.zeros(len(y))
    total = 0
    viol = np.inf
    stages = annealing_schedule(epsilon) if anneal else [epsilon]
    for k, eps in enumerate(stages):
        final = k == len(stages) - 1
        # intermediate stages only warm-start the next one
        budget = min(max_iter, 200) if final else min(max_iter, 100)
        for it in range(budget):
            f = -eps * logsumexp(logb[None, :] + (g[None, :] - C) / eps, axis=1)
            g = -eps * logsumexp(loga[:, None] + (f[:, None] - C) / eps, axis=0)
            total += 1
            if (it + 1) % check_every == 0:
                viol = _marginal_violation(f, g, C, loga, logb, eps)
                if viol <= tol:
                    break
        viol = _marginal_violation(f, g, C, loga, logb, eps)
        if final and viol > tol:
            # plain sweeps stall near ties at small eps
            f, g = _semidual_newton(g, C, loga, logb, eps, tol)
            viol = _marginal_violation(f, g, C, loga, logb, eps)
    return EntropicPotentials(f, g, epsilon, total, viol, bool(viol <= tol), a, b)


def soft_rank(rank_map: SoftRankMap, phi) -> np.ndarray:
    """Soft rank of one point (1-d input) or of each row of a 2-d input."""
    phi = np.asarray(phi, dtype=float)
    single = phi.ndim == 1
    pts = np.atleast_2d(phi)
    if pts.shape[1] != rank_map.target_samples.shape[1]:
        raise ValueError("point dimension does not match the rank map")
    logits = (rank_map.v[None, :] - half_sq_cost(pts, rank_map.target_samples)) / rank_map.epsilon
    w = np.exp(logits - logsumexp(logits, axis=1, keepdims=True))
    out = w @ rank_map.target_samples
    return out[0] if single else out


def uniform_targets(count: int, dim: int, seed) -> np.ndarray:
    return np.random.default_rng(seed).uniform(0.0, 1.0, size=(count, dim))


def fit_rank_map(points, epsilon: float = 1e-5, seed=0, *, weights=None, targets=None,
                 max_iter: int = 2000, tol: float = 1e-6) -> tuple[SoftRankMap, EntropicPotentials]:
    """Rank map of ``points`` towards ``Unif([0,1]^d)`` using ``len(points)`` seeded targets."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    psi = uniform_targets(len(pts), pts.shape[1], seed) if targets is None else np.asarray(targets, float)
    pot = sinkhorn(pts, psi, epsilon, max_iter, tol, a=weights)
    return SoftRankMap(psi, pot.v, epsilon), pot


# ---------------------------------------------------------------- autodiff path

def _softmin(pot: ad.Var, C: ad.Var, logw: np.ndarray, eps: float, axis: int) -> ad.Var:
    """``-eps * LSE(logw + (pot - C) / eps)`` reduced along ``axis`` of ``C``."""
    if axis == 1:
        z = logw[None, :] + (pot.value[None, :] - C.value) / eps
    else:
        z = logw[:, None] + (pot.value[:, None] - C.value) / eps
    lse = logsumexp(z, axis=axis, keepdims=True)
    S = np.exp(z - lse)
    out = -eps * lse.squeeze(axis)

    def d_pot(g):
        return -(S * np.expand_dims(g, axis)).sum(axis=1 - axis)

    def d_C(g):
        return S * np.expand_dims(g, axis)

    return ad.custom([pot, C], out, [d_pot, d_C], name="softmin")


@dataclass
class SRMMDConfig:
    tau: float = 0.5
    epsilon: float = 1e-5
    kernel: KernelSpec = field(default_factory=KernelSpec)
    anneal_iters: int = 20  # sweeps per annealing stage above the target epsilon
    final_iters: int = 200  # sweeps at the target epsilon
    seed: int = 0

    @property
    def total_iters(self) -> int:
        return self.anneal_iters * (len(annealing_schedule(self.epsilon)) - 1) + self.final_iters


def _kernel_mean(P: ad.Var, Q: ad.Var, kernel: KernelSpec) -> ad.Var:
    D = ad.sq_dists(P, Q)
    acc = None
    for s in kernel.bandwidths:
        term = ad.exp(D * (-1.0 / (2.0 * s * s)))
        acc = term if acc is None else acc + term
    return ad.mean(acc) / float(len(kernel.bandwidths))


@dataclass
class SRMMDResult:
    value: float
    degenerate: bool
    iterations: int


def srmmd_var(X: ad.Var, Y: ad.Var, config: SRMMDConfig | None = None) -> tuple[ad.Var, SRMMDResult]:
    """sRMMD recorded on a tape through a fixed number of Sinkhorn sweeps."""
    cfg = config or SRMMDConfig()
    if X.ndim != 2 or Y.ndim != 2 or X.shape[1] != Y.shape[1]:
        raise ValueError("X and Y must be 2-d with the same number of columns")
    m, n = X.shape[0], Y.shape[0]
    if m < 2 or n < 2:
        raise ValueError("sRMMD needs at least two samples per set")
    if not (np.all(np.isfinite(X.value)) and np.all(np.isfinite(Y.value))):
        raise OTInputError("sRMMD inputs must be finite")
    Z = ad.concatenate([X, Y], axis=0)
    if np.ptp(Z.value, axis=0).max() == 0.0:
        return ad.mul(ad.vsum(Z), 0.0), SRMMDResult(0.0, True, 0)
    N = m + n
    psi = uniform_targets(N, X.shape[1], cfg.seed)
    loga = np.log(np.concatenate([np.full(m, cfg.tau / m), np.full(n, (1.0 - cfg.tau) / n)]))
    logb = np.full(N, -math.log(N))
    C = ad.sq_dists(Z, psi) * 0.5
    tape = X.tape
    f = tape.const(np.zeros(N))
    g = tape.const(np.zeros(N))
    stages = annealing_schedule(cfg.epsilon)
    for k, eps in enumerate(stages):
        sweeps = cfg.final_iters if k == len(stages) - 1 else cfg.anneal_iters
        for _ in range(sweeps):
            f = _softmin(g, C, logb, eps, axis=1)
            g = _softmin(f, C, loga, eps, axis=0)
    eps = cfg.epsilon
    W = ad.softmax((ad.reshape(g, (1, N)) - C) * (1.0 / eps), axis=1)
    R = W @ psi
    RX, RY = R[:m], R[m:]
    mmd = _kernel_mean(RX, RX, cfg.kernel) + _kernel_mean(RY, RY, cfg.kernel) - 2.0 * _kernel_mean(RX, RY, cfg.kernel)
    if mmd.value < 0:
        mmd = ad.mul(mmd, 0.0)
    return mmd, SRMMDResult(float(mmd.value), False, cfg.total_iters)


def srmmd(X, Y, tau: float = 0.5, epsilon: float = 1e-5, kernel: KernelSpec | None = None, seed: int = 0,
          **kw) -> float:
    """Soft-rank MMD^2 between two sample sets (clamped at zero)."""
    cfg = SRMMDConfig(tau=tau, epsilon=epsilon, kernel=kernel or KernelSpec(), seed=seed, **kw)
    tape = ad.Tape()
    out, _ = srmmd_var(tape.const(np.atleast_2d(X)), tape.const(np.atleast_2d(Y)), cfg)
    return float(out.value)


def srmmd_grad(X, Y, tau: float = 0.5, epsilon: float = 1e-5, kernel: KernelSpec | None = None, seed: int = 0,
               **kw) -> tuple[float, np.ndarray, np.ndarray]:
    """Value and exact gradients of the truncated sRMMD computation."""
    cfg = SRMMDConfig(tau=tau, epsilon=epsilon, kernel=kernel or KernelSpec(), seed=seed, **kw)
    tape = ad.Tape()
    xv, yv = tape.leaf(np.atleast_2d(X)), tape.leaf(np.atleast_2d(Y))
    out, _ = srmmd_var(xv, yv, cfg)
    gx, gy = tape.backward(out, [xv, yv])
    return float(out.value), gx, gy
