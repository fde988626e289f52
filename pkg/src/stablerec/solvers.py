"""Solvers for the constrained and Tikhonov problems and the dual certificate.

The first-order engines are primal-dual splittings.  Along non-sharp
directions they converge slowly, so every solver periodically guesses the
active group set from its iterate and runs a Newton method on the smooth
problem restricted to that set.  The refined point is kept only when the
optimality residual confirms it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, NoCertificateError
from .groups import (
    GroupPartition,
    IndexReport,
    active_sets,
    classify_inactive,
    group_norm,
    group_prox,
    project_dual_ball,
    project_l1_ball,
)
from .linalg import as_matrix, as_vector, min_norm_solve, nullspace_basis, pseudo_inverse
from .operators import AnalysisOperator

log = logging.getLogger(__name__)


@dataclass(eq=False)
class ProblemInstance:
    """Measurement matrix, analysis operator, groups and ground truth.

    ``y0`` is always recomputed as ``phi @ x0``.
    """

    phi: np.ndarray
    op: AnalysisOperator
    partition: GroupPartition
    x0: np.ndarray
    y0: np.ndarray = field(init=False)

    def __post_init__(self):
        self.phi = as_matrix(self.phi, "phi")
        self.x0 = as_vector(self.x0, "x0")
        m, n = self.phi.shape
        if n != self.op.n or self.x0.size != n:
            raise InvalidInputError(
                f"phi is {m}x{n}, operator acts on R^{self.op.n}, x0 has length {self.x0.size}"
            )
        if self.partition.p != self.op.p:
            raise InvalidInputError("partition size does not match the analysis domain")
        self.y0 = self.phi @ self.x0

    @property
    def m(self) -> int:
        return self.phi.shape[0]

    @property
    def n(self) -> int:
        return self.phi.shape[1]

    def objective(self, x) -> float:
        return group_norm(self.op.analyze(x), self.partition)


@dataclass
class SolverConfig:
    max_iter: int = 200_000
    kkt_tol: float = 1e-8
    power_iters: int = 20
    check_every: int = 25
    polish_every: int = 500
    polish: bool = True
    seed: int = 0


@dataclass
class SolveReport:
    x: np.ndarray
    iterations: int
    kkt_residual: float
    objective: float
    converged: bool
    polished: bool = False
    history: list = field(default_factory=list, repr=False)


# --------------------------------------------------------------------------
# helpers


def operator_norm(apply, adjoint, dim: int, iters: int = 20, seed: int = 0) -> float:
    """Power-iteration estimate of the spectral norm of a linear map."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(dim)
    x /= np.linalg.norm(x)
    est = 0.0
    for _ in range(iters):
        y = adjoint(apply(x))
        nrm = np.linalg.norm(y)
        if nrm == 0.0:
            return 0.0
        est = np.sqrt(nrm)
        x = y / nrm
    return float(est)


def _sub_partition(P: GroupPartition, ids):
    """Partition of the concatenated coordinates of groups `ids`."""
    sizes = [P.groups[k].size for k in sorted(ids)]
    bounds = np.cumsum([0] + sizes)
    return GroupPartition(int(bounds[-1]), [range(a, b) for a, b in zip(bounds[:-1], bounds[1:])])


def _active_threshold(norms) -> float:
    return 1e-9 * max(1.0, float(norms.max(initial=0.0)))


def minimax_affine(C, c, P: GroupPartition, tol: float = 1e-13, max_iter: int = 100_000,
                   gamma: float | None = None):
    """Minimize ``max_J ||z_J||`` over the affine set ``{z : C z = c}``.

    Douglas-Rachford splitting between the affine projection (closed form via
    the pseudo-inverse) and the prox of the max-of-block-norms function,
    obtained from projection onto the l1/l2 unit ball by Moreau's identity.

    Returns
    -------
    z : ndarray
        Feasible point (up to the affine projection accuracy).
    value : float
        ``max_J ||z_J||``.
    iterations : int
    """
    C = np.asarray(C, dtype=float)
    c = np.asarray(c, dtype=float)
    q = P.p
    if q == 0:
        return np.zeros(0), 0.0, 0
    Cp = pseudo_inverse(C) if C.size else np.zeros((q, 0))

    def proj(z):
        return z - Cp @ (C @ z - c) if C.size else z

    s = proj(np.zeros(q))
    if P.block_norms(s).max() == 0.0:
        return s, 0.0, 0
    if gamma is None:
        gamma = max(float(P.block_norms(s).max()), 1e-3)
    z = s
    for it in range(1, max_iter + 1):
        z = proj(s)
        v = 2 * z - s
        xg = v - project_l1_ball(v, gamma, P)
        s = s + xg - z
        if it % 20 == 0 and np.linalg.norm(xg - z) <= tol * (1.0 + np.linalg.norm(z)):
            break
    z = proj(s)
    return z, float(P.block_norms(z).max()), it


def ball_constrained_residual(M, r, P: GroupPartition, s0=None, tol: float = 1e-14,
                              max_iter: int = 20_000, stop_above: float | None = None):
    """``min ||r - M s||`` over ``{s : ||s_J|| <= 1 for all J}``.

    First tries the minimum-norm least-squares solution; falls back to
    accelerated projected gradient from `s0`.  With `stop_above`, iteration
    ends as soon as a duality lower bound exceeds it (the returned value is
    then only an upper bound, but certainly above `stop_above`).
    """
    r = np.asarray(r, dtype=float)
    if P.p == 0:
        return float(np.linalg.norm(r)), np.zeros(0)
    M = np.asarray(M, dtype=float)
    ls = min_norm_solve(M, r, tol=0.0)
    if P.block_norms(ls.x).max() <= 1.0 + 1e-12:
        s = project_dual_ball(ls.x, 1.0, P)
        return float(np.linalg.norm(r - M @ s)), s
    # the affine solution set may still meet the balls away from the min-norm point
    if ls.residual <= 1e-12 * (1.0 + np.linalg.norm(r)):
        z, val, _ = minimax_affine(M, r, P)
        if val <= 1.0 + 1e-12:
            s = project_dual_ball(z, 1.0, P)
            return float(np.linalg.norm(r - M @ s)), s
    L = np.linalg.norm(M, 2) ** 2
    if L == 0.0:
        return float(np.linalg.norm(r)), np.zeros(P.p)
    s = project_dual_ball(ls.x if s0 is None else np.asarray(s0, float), 1.0, P)
    yk, tk = s.copy(), 1.0
    best = np.linalg.norm(r - M @ s)
    for _ in range(max_iter):
        g = M.T @ (M @ yk - r)
        s_new = project_dual_ball(yk - g / L, 1.0, P)
        t_new = 0.5 * (1 + np.sqrt(1 + 4 * tk * tk))
        yk = s_new + ((tk - 1) / t_new) * (s_new - s)
        if np.linalg.norm(s_new - s) <= tol * (1 + np.linalg.norm(s)):
            s = s_new
            break
        s, tk = s_new, t_new
        lam = r - M @ s
        best = min(best, np.linalg.norm(lam))
        if stop_above is not None and best > 0:
            # <lam, r - M s'> <= ||lam|| ||r - M s'|| for every feasible s'
            lower = (lam @ r - P.block_norms(M.T @ lam).sum()) / best
            if lower > stop_above:
                break
    return float(min(best, np.linalg.norm(r - M @ s))), s


def _newton_restricted(Dm, P, I, x_p, N, mu, phi=None, y=None, t0=None, max_iter=60):
    """Newton's method on ``t -> 0.5 ||phi x - y||^2 + mu sum_{J in I} ||(D* x)_J||``.

    ``x = x_p + N t``; the quadratic term is dropped when `phi` is None.
    Returns the refined ``x`` or None when an active block collapses.
    """
    k = N.shape[1]
    if k == 0:
        return x_p.copy()
    cI = P.coords(I)
    sub = _sub_partition(P, I)
    lab = sub.labels
    DN = (Dm.T @ N)[cI]
    Dxp = (Dm.T @ x_p)[cI]
    if phi is not None:
        PhiN = phi @ N
        r0 = phi @ x_p - y
        Q = PhiN.T @ PhiN
    t = np.zeros(k) if t0 is None else np.asarray(t0, float)

    def value(t):
        out = mu * sub.block_norms(Dxp + DN @ t).sum()
        if phi is not None:
            out += 0.5 * np.sum((PhiN @ t + r0) ** 2)
        return out

    scale = max(1.0, np.linalg.norm(Dxp + DN @ t))
    f = value(t)
    for _ in range(max_iter):
        yv = Dxp + DN @ t
        nb = sub.block_norms(yv)
        if nb.min(initial=np.inf) <= 1e-12 * scale:
            return None
        e = yv / nb[lab]
        grad = mu * (DN.T @ e)
        # block Hessians (Id - e e^T) / r, assembled for all groups at once
        G = np.zeros((sub.count, k))
        np.add.at(G, lab, e[:, None] * DN)
        inv = 1.0 / nb
        H = mu * (DN.T @ (DN * inv[lab][:, None]) - G.T @ (G * inv[:, None]))
        if phi is not None:
            grad += PhiN.T @ (PhiN @ t + r0)
            H += Q
        if np.linalg.norm(grad) <= 1e-15 * (1.0 + abs(f)):
            break
        w, V = np.linalg.eigh(0.5 * (H + H.T))
        keep = w > 1e-12 * max(w.max(initial=0.0), 1e-300)
        step = -(V[:, keep] / w[keep]) @ (V[:, keep].T @ grad)
        if not keep.any() or grad @ step >= 0:
            step = -grad
        alpha = 1.0
        while alpha > 1e-12:
            f_new = value(t + alpha * step)
            if f_new <= f + 1e-4 * alpha * (grad @ step) + 1e-15 * abs(f):
                break
            alpha *= 0.5
        else:
            break
        t = t + alpha * step
        f = f_new
        if np.linalg.norm(alpha * step) <= 1e-16 * (1 + np.linalg.norm(t)):
            break
    return x_p + N @ t


# --------------------------------------------------------------------------
# constrained problem  min ||D* x||_{1,2}  s.t.  phi x = y0


def bp_kkt_residual(inst: ProblemInstance, x, zero_tol: float | None = None,
                    s0=None, stop_above: float | None = None, _cache=None) -> float:
    """Optimality residual of a feasible `x` for the constrained problem.

    Maximum of the scaled feasibility gap and the smallest norm of the
    ``Ker phi`` component of ``D s`` over subgradients ``s`` of the group norm
    at ``D* x`` (zero iff ``D s`` lies in ``Im phi^T``).
    """
    x = as_vector(x, "x", inst.n)
    P = inst.partition
    feas = np.linalg.norm(inst.phi @ x - inst.y0) / (1.0 + np.linalg.norm(inst.y0))
    dx = inst.op.analyze(x)
    norms = P.block_norms(dx)
    if zero_tol is None:
        zero_tol = _active_threshold(norms)
    act = norms > zero_tol
    I = [k for k in range(P.count) if act[k]]
    Ic = [k for k in range(P.count) if not act[k]]
    Dm, Nk = _cache if _cache is not None else (inst.op.materialize(), nullspace_basis(inst.phi))
    e = np.zeros(P.p)
    for k in I:
        g = P.groups[k]
        e[g] = dx[g] / norms[k]
    r = -Nk.T @ (Dm @ e)
    cIc = P.coords(Ic)
    M = Nk.T @ Dm[:, cIc]
    s_init = None if s0 is None else np.asarray(s0)[cIc]
    stat, _ = ball_constrained_residual(M, r, _sub_partition(P, Ic), s_init,
                                       stop_above=stop_above)
    return float(max(feas, stat))


def solve_basis_pursuit(inst: ProblemInstance, cfg: SolverConfig | None = None) -> SolveReport:
    """Minimize ``||D* x||_{1,2}`` subject to ``phi x = y0``.

    Primal-dual hybrid gradient with the primal step projected onto the
    affine feasible set and the dual step projected onto the product of unit
    balls (prox of the conjugate of the group norm).
    """
    cfg = cfg or SolverConfig()
    phi, op, P, y0 = inst.phi, inst.op, inst.partition, inst.y0
    phi_pinv = pseudo_inverse(phi)
    Pk = np.eye(inst.n) - phi_pinv @ phi
    Dm = op.materialize()
    cache = (Dm, nullspace_basis(phi))

    def proj(x):
        return x - phi_pinv @ (phi @ x - y0)

    x = phi_pinv @ y0
    if np.linalg.norm(y0) == 0.0 or P.block_norms(op.analyze(x)).max() == 0.0:
        res = bp_kkt_residual(inst, x, _cache=cache)
        return SolveReport(x, 0, res, inst.objective(x), res <= cfg.kkt_tol)

    L = 1.05 * operator_norm(op.analyze, op.synthesize, inst.n, cfg.power_iters, cfg.seed)
    omega = max(1.0, np.linalg.norm(x)) / np.sqrt(P.count)
    tau, sigma = omega / L, 1.0 / (omega * L)
    u = np.zeros(op.p)
    xbar = x.copy()
    best_res = np.inf
    best = None  # (residual, x) of the best refined candidate so far
    gate = _PolishGate(cfg.polish_every)
    it = 0
    history = []
    for it in range(1, cfg.max_iter + 1):
        u = project_dual_ball(u + sigma * op.analyze(xbar), 1.0, P)
        x_new = proj(x - tau * op.synthesize(u))
        xbar = 2 * x_new - x
        x = x_new
        if it % cfg.check_every:
            continue
        dx = op.analyze(x)
        obj = float(P.block_norms(dx).sum())
        stat = np.linalg.norm(Pk @ op.synthesize(u))
        gap = max(0.0, obj - float(u @ dx)) / (1.0 + obj)
        cheap = max(stat, gap)
        history.append(obj)
        if cfg.polish and gate.due(it, cheap < 1e-3 * best_res):
            best_res = min(best_res, cheap)
            for ref in _polish_bp(inst, x, cheap, Dm):
                res = bp_kkt_residual(inst, ref, s0=u, stop_above=cfg.kkt_tol, _cache=cache)
                if res <= cfg.kkt_tol:
                    return SolveReport(ref, it, res, inst.objective(ref), True, True, history)
                if best is None or res < best[0]:
                    best = (res, ref)
        if cheap <= 1e-3 * cfg.kkt_tol:
            res = bp_kkt_residual(inst, x, s0=u, _cache=cache)
            if res <= cfg.kkt_tol:
                return SolveReport(x, it, res, inst.objective(x), True, False, history)
    res = bp_kkt_residual(inst, x, s0=u, _cache=cache)
    polished = False
    if best is not None:
        # the early-exit residual is only a lower bound; recompute it in full
        b_res = bp_kkt_residual(inst, best[1], s0=u, _cache=cache)
        if b_res < res:
            res, x, polished = b_res, best[1], True
    log.info("basis pursuit stopped after %d iterations, residual %.3g", it, res)
    return SolveReport(x, it, res, inst.objective(x), res <= cfg.kkt_tol, polished, history)


class _PolishGate:
    """Schedules refinement attempts; the period grows after each failure."""

    def __init__(self, every: int):
        self.every = float(every)
        self.cap = 16.0 * every
        self.next = every

    def due(self, it: int, progress: bool) -> bool:
        if not progress and it < self.next:
            return False
        self.every = min(1.25 * self.every, self.cap)
        self.next = it + int(self.every)
        return True


def _support_guesses(P, dx, res):
    """Distinct candidate active sets from a few relative norm thresholds.

    A group that is about to enter the support can have a tiny norm in the
    current iterate, so several thresholds are tried from coarse to fine.
    """
    norms = P.block_norms(dx)
    seen = set()
    for rel in (min(1e-3, max(1e-9, 100.0 * res)), 1e-5, 1e-7):
        act = norms > norms.max() * rel
        key = tuple(np.nonzero(act)[0])
        if key and key not in seen:
            seen.add(key)
            yield list(key), [k for k in range(P.count) if not act[k]]


def _polish_bp(inst, x, res, Dm):
    P = inst.partition
    for I, Ic in _support_guesses(P, inst.op.analyze(x), res):
        cIc = P.coords(Ic)
        A = np.vstack([inst.phi, Dm[:, cIc].T])
        rhs = np.concatenate([inst.y0, np.zeros(cIc.size)])
        part = min_norm_solve(A, rhs, tol=1e-11)
        if not part.feasible:
            continue
        N = nullspace_basis(A)
        ref = _newton_restricted(Dm, P, I, part.x, N, 1.0, t0=N.T @ (x - part.x))
        if ref is not None:
            yield ref


# --------------------------------------------------------------------------
# Tikhonov problem  min 0.5 ||phi x - y||^2 + mu ||D* x||_{1,2}


def verify_tikhonov_optimality(x, y, mu, phi, op: AnalysisOperator, P: GroupPartition,
                               zero_tol: float | None = None) -> float:
    """Distance from ``-phi^T (phi x - y)`` to ``mu D (subdifferential at D* x)``.

    Exact per-group distances for the identity operator; a ball-constrained
    least-squares problem otherwise.  Zero exactly at minimizers.
    """
    if mu <= 0:
        raise InvalidInputError("mu must be positive")
    phi = as_matrix(phi, "phi")
    x = as_vector(x, "x", phi.shape[1])
    g = -phi.T @ (phi @ x - np.asarray(y, dtype=float))
    dx = op.analyze(x)
    norms = P.block_norms(dx)
    if zero_tol is None:
        zero_tol = _active_threshold(norms)
    act = norms > zero_tol
    if op.kind == "identity":
        gn = P.block_norms(g)
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(act, mu / norms, 0.0)
        diff = g - scale[P.labels] * dx
        dist = np.where(act, P.block_norms(diff), np.maximum(gn - mu, 0.0))
        return float(np.linalg.norm(dist))
    I = [k for k in range(P.count) if act[k]]
    Ic = [k for k in range(P.count) if not act[k]]
    e = np.zeros(P.p)
    for k in I:
        b = P.groups[k]
        e[b] = dx[b] / norms[k]
    Dm = op.materialize()
    r = g - mu * (Dm @ e)
    cIc = P.coords(Ic)
    res, _ = ball_constrained_residual(mu * Dm[:, cIc], r, _sub_partition(P, Ic))
    return res


def tikhonov_objective(x, y, mu, phi, op, P) -> float:
    return float(0.5 * np.sum((phi @ x - y) ** 2) + mu * group_norm(op.analyze(x), P))


def solve_tikhonov(phi, op: AnalysisOperator, P: GroupPartition, y, mu: float,
                   cfg: SolverConfig | None = None, x_init=None) -> SolveReport:
    """Minimize ``0.5 ||phi x - y||^2 + mu ||D* x||_{1,2}``.

    For the identity operator the dual variable can be eliminated and the
    iteration is forward-backward splitting (monotone in the objective).
    Otherwise the primal-dual (Condat-Vu) iteration handles the quadratic term
    through its gradient.
    """
    if mu <= 0:
        raise InvalidInputError("mu must be positive")
    cfg = cfg or SolverConfig()
    phi = as_matrix(phi, "phi")
    y = as_vector(y, "y", phi.shape[0])
    n = phi.shape[1]
    Dm = op.materialize()
    Lf = np.linalg.norm(phi, 2) ** 2
    x = np.zeros(n) if x_init is None else as_vector(x_init, "x_init", n).copy()

    def check(x):
        return verify_tikhonov_optimality(x, y, mu, phi, op, P)

    if np.linalg.norm(phi.T @ y) == 0.0 and x_init is None:
        res = check(x)
        return SolveReport(x, 0, res, tikhonov_objective(x, y, mu, phi, op, P), res <= cfg.kkt_tol)

    identity = op.kind == "identity"
    if identity:
        tau = 1.0 / max(Lf, 1e-300)
    else:
        Ld = 1.05 * operator_norm(op.analyze, op.synthesize, n, cfg.power_iters, cfg.seed)
        sigma = 1.0 / max(Ld, 1e-300)
        tau = 1.0 / (Lf / 2 + sigma * Ld**2) * 0.99
        u = np.zeros(op.p)
    history = []
    best = (np.inf, x)
    gate = _PolishGate(cfg.polish_every)
    it = 0
    for it in range(1, cfg.max_iter + 1):
        grad = phi.T @ (phi @ x - y)
        if identity:
            x = group_prox(x - tau * grad, tau * mu, P)
        else:
            x_new = x - tau * (grad + op.synthesize(u))
            u = project_dual_ball(u + sigma * op.analyze(2 * x_new - x), mu, P)
            x = x_new
        if it % cfg.check_every:
            continue
        history.append(tikhonov_objective(x, y, mu, phi, op, P))
        if identity:
            cheap = check(x)
        else:
            dx = op.analyze(x)
            cheap = max(np.linalg.norm(phi.T @ (phi @ x - y) + op.synthesize(u)),
                        abs(mu * P.block_norms(dx).sum() - float(u @ dx)))
        if cheap <= cfg.kkt_tol:
            res = check(x)
            if res <= cfg.kkt_tol:
                return SolveReport(x, it, res, history[-1], True, False, history)
        if cfg.polish and gate.due(it, cheap < 1e-3 * best[0]):
            best = (min(best[0], cheap), x)
            for ref in _polish_tikhonov(phi, Dm, P, y, mu, x, cheap):
                res = check(ref)
                if res <= cfg.kkt_tol:
                    obj = tikhonov_objective(ref, y, mu, phi, op, P)
                    return SolveReport(ref, it, res, obj, True, True, history)
    res = check(x)
    return SolveReport(x, it, res, tikhonov_objective(x, y, mu, phi, op, P),
                       res <= cfg.kkt_tol, False, history)


def _polish_tikhonov(phi, Dm, P, y, mu, x, res):
    dx = Dm.T @ x
    if P.block_norms(dx).max() == 0.0:
        return
    for I, Ic in _support_guesses(P, dx, res):
        cIc = P.coords(Ic)
        N = nullspace_basis(Dm[:, cIc].T) if cIc.size else np.eye(phi.shape[1])
        ref = _newton_restricted(Dm, P, I, np.zeros(phi.shape[1]), N, mu, phi, y, t0=N.T @ x)
        if ref is not None:
            yield ref


# --------------------------------------------------------------------------
# dual certificate


def source_coefficient(inst: ProblemInstance, zero_tol: float | None = None,
                       theta: float = 0.99, tol: float = 1e-13,
                       max_iter: int = 100_000, value_tol: float = 1e-6) -> IndexReport:
    """Minimax dual certificate of the ground truth.

    Solves ``min max_{J in Ic} ||z_J||`` over
    ``{(z, w) : D (z + e) + phi^T w = 0, z_I = 0}``; ``rho`` is the squared
    optimal value and ``v = z + e``.

    Raises
    ------
    NoCertificateError
        When the affine system has no solution, or when its minimax value
        exceeds ``1 + value_tol``; either way ``x0`` is not a minimizer.
    """
    P, op, phi = inst.partition, inst.op, inst.phi
    ybar = op.analyze(inst.x0)
    I, Ic, e = active_sets(ybar, P, zero_tol)
    Dm = op.materialize()
    Nk = nullspace_basis(phi)
    De = Dm @ e
    cIc = P.coords(Ic)
    C = Nk.T @ Dm[:, cIc]
    c = -(Nk.T @ De)
    sub = _sub_partition(P, Ic)
    feas = min_norm_solve(C, c, tol=1e-9) if C.size else None
    if C.size == 0:
        if Nk.shape[1] and np.linalg.norm(c) > 1e-9 * (1 + np.linalg.norm(De)):
            raise NoCertificateError("D e is not in the range of phi^T")
        z = np.zeros(cIc.size)
    else:
        if not feas.feasible:
            raise NoCertificateError(
                f"certificate system infeasible (residual {feas.residual:.3g}); "
                "x0 is not a minimizer"
            )
        z, _, _ = minimax_affine(C, c, sub, tol=tol, max_iter=max_iter)
    value = float(sub.block_norms(z).max(initial=0.0))
    if value > 1.0 + value_tol:
        raise NoCertificateError(
            f"smallest inactive certificate norm {value:.8g} exceeds 1; x0 is not a minimizer"
        )
    v = e.copy()
    v[cIc] = z
    rho = float(sub.block_norms(z).max(initial=0.0) ** 2)
    sol = min_norm_solve(phi.T, -(Dm @ v), tol=np.inf)
    K, H = classify_inactive(v, P, Ic, theta)
    return IndexReport(ybar=ybar, e=e, I=I, Ic=Ic, K=K, H=H, v=v, rho=rho,
                       w=sol.x, residual=sol.residual)


# --------------------------------------------------------------------------
# stability probe and the explicit non-stable sequence


@dataclass
class ProbeRow:
    delta: float
    mu: float
    ratio: float
    direction_id: int
    converged: bool = True


@dataclass
class ProbeResult:
    rows: list
    max_ratio: float
    failures: int = 0

    def max_by_delta(self) -> dict:
        out: dict = {}
        for r in self.rows:
            if r.converged:
                out[r.delta] = max(out.get(r.delta, 0.0), r.ratio)
        return out


def stability_probe(inst: ProblemInstance, c: float = 1.0, deltas=(1e-1, 1e-2, 1e-3, 1e-4),
                    dirs_per_delta: int = 20, seed: int = 0,
                    cfg: SolverConfig | None = None) -> ProbeResult:
    """Empirical stability constant: ``||x(y, mu) - x0|| / delta`` with ``mu = c delta``.

    Observations sit on the sphere ``||y - y0|| = delta`` in directions drawn
    uniformly (normalized Gaussians).
    """
    if c <= 0 or any(d <= 0 for d in deltas):
        raise InvalidInputError("c and every delta must be positive")
    rng = np.random.default_rng(seed)
    rows = []
    for delta in deltas:
        for j in range(dirs_per_delta):
            d = rng.standard_normal(inst.m)
            d /= np.linalg.norm(d)
            y = inst.y0 + delta * d
            rep = solve_tikhonov(inst.phi, inst.op, inst.partition, y, c * delta, cfg,
                                 x_init=inst.x0)
            ratio = float(np.linalg.norm(rep.x - inst.x0) / delta)
            rows.append(ProbeRow(delta, c * delta, ratio, j, rep.converged))
    good = [r.ratio for r in rows if r.converged]
    return ProbeResult(rows, max(good, default=0.0), sum(not r.converged for r in rows))


@dataclass
class AdversarialStep:
    t: float
    x: np.ndarray
    y: np.ndarray
    mu: float
    direction: np.ndarray
    residual: float
    ratio: float


def adversarial_sequence(a: float, t_list, inst: ProblemInstance | None = None):
    """Exact Tikhonov minimizers drifting away from x0 on the two-group example.

    For each ``t`` the direction ``w_t = (a, -a, c_t, d_t)`` is bent so that
    ``x_t = x0 + t w_t`` has a gradient ``v_t`` lying in ``Im phi^T``.  With
    ``mu_t = ||phi (x_t - x0)||`` and ``y_t = phi x_t + mu_t u_t``
    (``phi^T u_t = v_t``), ``x_t`` solves the Tikhonov problem at
    ``(y_t, mu_t)`` while ``||x_t - x0|| / ||y_t - y0||`` grows like
    ``t^{-1/2}``.
    """
    from .fixtures import strong_unstable_example

    if a <= 0:
        raise InvalidInputError("a must be positive")
    inst = inst or strong_unstable_example()
    phi, x0 = inst.phi, inst.x0
    out = []
    for t in t_list:
        t = float(t)
        rad = 2 * t * a - 2 * t * t * a * a
        if t <= 0 or rad <= 0:
            raise InvalidInputError(f"t = {t} outside the admissible range (0, 1/a)")
        nrm = np.hypot(t * a, 1 - t * a)
        ck = a * np.sqrt(rad) / nrm
        dk = a * (1 - 2 * t * a) / nrm
        w = np.array([a, -a, ck, dk])
        x = x0 + t * w
        v = np.concatenate([x[:2] / np.linalg.norm(x[:2]), x[2:] / np.linalg.norm(x[2:])])
        sol = min_norm_solve(phi.T, v)
        if not sol.feasible:
            raise NoCertificateError("gradient at x_t is not in the range of phi^T")
        mu = float(np.linalg.norm(phi @ (x - x0)))
        y = phi @ x + mu * sol.x
        res = verify_tikhonov_optimality(x, y, mu, phi, inst.op, inst.partition)
        ratio = float(np.linalg.norm(x - x0) / np.linalg.norm(y - inst.y0))
        out.append(AdversarialStep(t, x, y, mu, w, res, ratio))
    return out
