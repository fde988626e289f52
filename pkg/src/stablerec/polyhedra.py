"""Polyhedral cones: a small dense simplex solver and exact triviality tests.

A cone is decided trivial in two stages.  Every constraint is first split
into an equality part (the component orthogonal to the ray direction) and a
sign part (the component along it).  The equality parts cut out a subspace
``S = range(N)``; inside it the cone reads ``{N t : G t >= 0}``.

* lineality stage: a nonzero ``t`` with ``G t = 0`` is a witness;
* ray stage: otherwise the LP ``max sum(G t)  s.t.  G t >= 0, sum(G t) <= 1``
  has a positive optimum exactly when some nonzero cone element exists.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, SolverFailure
from .linalg import RANK_TOL, as_matrix, nullspace_basis, orthonormal_range_basis

LP_POSITIVE_TOL = 1e-6


# --------------------------------------------------------------------------
# simplex


@dataclass
class LPResult:
    status: str  # "optimal", "infeasible" or "unbounded"
    value: float = float("nan")
    x: np.ndarray | None = None
    pivots: int = 0


class _Tableau:
    """Dense tableau for ``max c.x  s.t.  A x = b, x >= 0`` with ``b >= 0``."""

    def __init__(self, A, b, basis, eps, max_pivots):
        self.T = np.hstack([A, b[:, None]])
        self.basis = list(basis)
        self.eps = eps
        self.max_pivots = max_pivots
        self.pivots = 0

    def pivot(self, r, j):
        T = self.T
        T[r] /= T[r, j]
        col = T[:, j].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        self.basis[r] = j
        self.pivots += 1

    def run(self, c, allowed):
        """Maximize ``c.x`` over the current tableau with Bland's rule.

        Returns False when the objective is unbounded on the allowed columns.
        """
        T = self.T
        m = T.shape[0]
        while True:
            cb = c[self.basis]
            reduced = c - cb @ T[:, :-1]
            cand = np.nonzero((reduced > self.eps) & allowed)[0]
            if cand.size == 0:
                return True
            j = int(cand[0])
            colj = T[:, j]
            pos = colj > self.eps
            if not np.any(pos):
                return False
            ratios = np.full(m, np.inf)
            ratios[pos] = T[pos, -1] / colj[pos]
            best = ratios.min()
            ties = np.nonzero(ratios <= best + self.eps * max(1.0, abs(best)))[0]
            r = int(min(ties, key=lambda i: self.basis[i]))
            self.pivot(r, j)
            if self.pivots > self.max_pivots:
                raise SolverFailure(f"simplex exceeded {self.max_pivots} pivots")


def lp_maximize(c, Aeq, beq, nonneg_mask=None, eps: float = 1e-11, max_pivots: int = 20000):
    """Solve ``max c.x  s.t.  Aeq x = beq`` with optional sign constraints.

    Parameters
    ----------
    c : array_like, shape (n,)
    Aeq : array_like, shape (m, n)
    beq : array_like, shape (m,)
    nonneg_mask : array_like of bool, optional
        True where ``x_i >= 0`` is imposed.  Defaults to all True; free
        variables are split into positive and negative parts.

    Returns
    -------
    LPResult
        ``status`` is ``"optimal"`` (with ``value`` and a vertex ``x``),
        ``"infeasible"`` or ``"unbounded"``.

    Raises
    ------
    SolverFailure
        When the pivot cap is hit.
    """
    c = np.asarray(c, dtype=float).ravel()
    n = c.size
    A = as_matrix(Aeq, "Aeq") if np.size(Aeq) else np.zeros((0, n))
    b = np.asarray(beq, dtype=float).ravel()
    if A.shape != (b.size, n):
        raise InvalidInputError(f"inconsistent LP dimensions {A.shape}, {b.size}, {n}")
    mask = np.ones(n, bool) if nonneg_mask is None else np.asarray(nonneg_mask, bool)
    free = np.nonzero(~mask)[0]
    # x = [x_nonneg_or_pos..., x_neg for free vars]
    A2 = np.hstack([A, -A[:, free]])
    c2 = np.concatenate([c, -c[free]])
    nv = A2.shape[1]

    # drop all-zero rows (inconsistent ones mean infeasible)
    keep = []
    for i in range(A2.shape[0]):
        scale = np.abs(A2[i]).max() if nv else 0.0
        if scale == 0.0:
            if abs(b[i]) > eps:
                return LPResult("infeasible")
            continue
        keep.append(i)
    A2 = A2[keep]
    b2 = b[keep].copy()
    scales = np.abs(A2).max(axis=1) if A2.size else np.zeros(0)
    A2 = A2 / scales[:, None] if A2.size else A2
    b2 = b2 / scales if b2.size else b2
    neg = b2 < 0
    A2[neg] *= -1
    b2[neg] *= -1
    m = A2.shape[0]

    # phase 1 with one artificial per row
    tab = _Tableau(np.hstack([A2, np.eye(m)]), b2, range(nv, nv + m), eps, max_pivots)
    c1 = np.concatenate([np.zeros(nv), -np.ones(m)])
    tab.run(c1, np.ones(nv + m, bool))
    infeas = tab.T[:, -1][np.array(tab.basis) >= nv].sum() if m else 0.0
    if infeas > 1e-9 * max(1.0, np.abs(b2).max(initial=0.0)):
        return LPResult("infeasible", pivots=tab.pivots)

    # drive zero-valued artificials out of the basis, dropping redundant rows
    r = 0
    while r < len(tab.basis):
        if tab.basis[r] >= nv:
            row = tab.T[r, :nv]
            cand = np.nonzero(np.abs(row) > 1e-9)[0]
            if cand.size:
                tab.pivot(r, int(cand[0]))
            else:
                tab.T = np.delete(tab.T, r, axis=0)
                del tab.basis[r]
                continue
        r += 1
    tab.T = np.hstack([tab.T[:, :nv], tab.T[:, -1:]])

    allowed = np.ones(nv, bool)
    if not tab.run(c2, allowed):
        return LPResult("unbounded", pivots=tab.pivots)
    x2 = np.zeros(nv)
    x2[tab.basis] = tab.T[:, -1]
    x2 = np.maximum(x2, 0.0)
    x = x2[:n].copy()
    x[free] -= x2[n:]
    return LPResult("optimal", value=float(c @ x), x=x, pivots=tab.pivots)


def _ray_lp(G, lp_tol):
    """Return ``t`` with ``G t >= 0`` and ``sum(G t) = 1``, or None."""
    r, k = G.shape
    # variables: t+ (k), t- (k), s (r), q (1)
    A = np.zeros((r + 1, 2 * k + r + 1))
    A[:r, :k] = G
    A[:r, k : 2 * k] = -G
    A[:r, 2 * k : 2 * k + r] = -np.eye(r)
    A[r, 2 * k : 2 * k + r] = 1.0
    A[r, -1] = 1.0
    b = np.zeros(r + 1)
    b[r] = 1.0
    c = np.zeros(2 * k + r + 1)
    c[2 * k : 2 * k + r] = 1.0
    res = lp_maximize(c, A, b)
    if res.status != "optimal":
        raise SolverFailure(f"ray LP returned status {res.status}")
    if res.value <= lp_tol:
        return None
    return res.x[:k] - res.x[k : 2 * k]


# --------------------------------------------------------------------------
# cones


def _unit(d):
    d = np.asarray(d, dtype=float).ravel()
    nrm = np.linalg.norm(d)
    if nrm == 0.0 or not np.isfinite(nrm):
        raise InvalidInputError("cone direction must be a finite nonzero vector")
    return d / nrm


@dataclass
class ConeSpec:
    """``{w : A w = 0,  B_J w in R_+ d_J (rays),  B_J w in R d_J (lines)}``."""

    ambient_dim: int
    equalities: np.ndarray = None
    rays: list = field(default_factory=list)
    lines: list = field(default_factory=list)

    def __post_init__(self):
        d = self.ambient_dim
        if self.equalities is None or np.size(self.equalities) == 0:
            self.equalities = np.zeros((0, d))
        else:
            self.equalities = as_matrix(self.equalities, "equalities")
        if self.equalities.shape[1] != d:
            raise InvalidInputError("equality matrix has wrong column count")
        self.rays = [self._block(B, v) for B, v in self.rays]
        self.lines = [self._block(B, v) for B, v in self.lines]

    def _block(self, B, v):
        B = as_matrix(B, "B_J")
        u = _unit(v)
        if B.shape != (u.size, self.ambient_dim):
            raise InvalidInputError(f"block of shape {B.shape} does not match direction {u.size}")
        return B, u

    def residual(self, w) -> float:
        """Largest constraint violation of `w` (0 for cone members)."""
        w = np.asarray(w, dtype=float)
        out = [np.abs(self.equalities @ w).max(initial=0.0)]
        for B, d in self.rays:
            bw = B @ w
            lam = d @ bw
            out.append(np.linalg.norm(bw - lam * d))
            out.append(max(0.0, -lam))
        for B, d in self.lines:
            bw = B @ w
            out.append(np.linalg.norm(bw - (d @ bw) * d))
        return float(max(out))

    def split(self):
        """Equality rows defining the subspace and the ray sign functionals."""
        rows = [self.equalities]
        for B, d in self.rays + self.lines:
            rows.append(B - np.outer(d, d @ B))
        signs = np.array([d @ B for B, d in self.rays]).reshape(len(self.rays), self.ambient_dim)
        return np.vstack(rows), signs


@dataclass
class TrivialityResult:
    trivial: bool
    witness: np.ndarray | None = None
    source: str = ""  # "lineality" or "ray-LP"; empty when trivial


def cone_is_trivial(C: ConeSpec, rel_tol: float = RANK_TOL, lp_tol: float = LP_POSITIVE_TOL):
    """Decide whether the cone `C` is ``{0}``; otherwise return a unit witness."""
    eq_rows, signs = C.split()
    N = nullspace_basis(eq_rows, rel_tol) if eq_rows.shape[0] else np.eye(C.ambient_dim)
    if N.shape[1] == 0:
        return TrivialityResult(True)
    G = signs @ N
    M = nullspace_basis(G, rel_tol) if G.shape[0] else np.eye(N.shape[1])
    if M.shape[1]:
        w = N @ M[:, 0]
        return TrivialityResult(False, w / np.linalg.norm(w), "lineality")
    t = _ray_lp(G, lp_tol)
    if t is None:
        return TrivialityResult(True)
    w = N @ t
    return TrivialityResult(False, w / np.linalg.norm(w), "ray-LP")


@dataclass
class ForcedZeroResult:
    forced: bool
    witness: np.ndarray | None = None
    source: str = ""


def forced_zero_projection(
    L,
    z_dim: int,
    functionals,
    rel_tol: float = RANK_TOL,
    lp_tol: float = LP_POSITIVE_TOL,
):
    """Decide whether ``Z = {z : exists aux, L (z, aux) = 0, <z_J, v_J> >= 0}`` is ``{0}``.

    Parameters
    ----------
    L : array_like, shape (rows, z_dim + aux_dim)
        Linear map; the first `z_dim` columns act on ``z``.
    z_dim : int
    functionals : list of (coords, v_J)
        ``coords`` indexes into ``z``; each pair imposes ``<z[coords], v_J> >= 0``.

    Returns
    -------
    ForcedZeroResult
        ``forced`` is True when ``Z = {0}``; otherwise ``witness`` is a unit
        vector of ``Z``.
    """
    if z_dim == 0:
        return ForcedZeroResult(True)
    L = as_matrix(L, "L")
    N = nullspace_basis(L, rel_tol) if L.shape[0] else np.eye(L.shape[1])
    if N.shape[1] == 0:
        return ForcedZeroResult(True)
    Nz = N[:z_dim]
    F = np.zeros((len(functionals), N.shape[1]))
    for i, (coords, v) in enumerate(functionals):
        F[i] = np.asarray(v, dtype=float) @ Nz[np.asarray(coords)]
    M = nullspace_basis(F, rel_tol) if F.shape[0] else np.eye(N.shape[1])
    if M.shape[1]:
        Z = Nz @ M
        s = np.linalg.svd(Z, compute_uv=False) if Z.size else np.zeros(0)
        # columns of N are unit vectors, so an absolute threshold is meaningful
        if s.size and s[0] > rel_tol:
            z = orthonormal_range_basis(Z, rel_tol)[:, 0]
            return ForcedZeroResult(False, z, "lineality")
    t = _ray_lp(F, lp_tol) if F.shape[0] else None
    if t is None:
        return ForcedZeroResult(True)
    z = Nz @ t
    return ForcedZeroResult(False, z / np.linalg.norm(z), "ray-LP")
