"""Group structure of the l1/l2 norm: norms, prox, index sets, Hessian blocks."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, InvalidInputError
from .linalg import as_vector


@dataclass(frozen=True, eq=False)
class GroupPartition:
    """A partition of ``{0, ..., p-1}`` into ordered, disjoint, nonempty groups.

    Indices are zero-based.  ``labels[i]`` is the id of the group owning
    coordinate ``i``.
    """

    p: int
    groups: tuple
    labels: np.ndarray = field(repr=False)

    def __init__(self, p: int, groups: Sequence[Sequence[int]]):
        p = int(p)
        gs = tuple(np.asarray(g, dtype=np.intp).ravel() for g in groups)
        labels = np.full(p, -1, dtype=np.intp)
        for k, g in enumerate(gs):
            if g.size == 0:
                raise InvalidInputError(f"group {k} is empty")
            if g.min() < 0 or g.max() >= p:
                raise InvalidInputError(f"group {k} has indices outside [0, {p})")
            if np.any(labels[g] != -1) or np.unique(g).size != g.size:
                raise InvalidInputError(f"group {k} overlaps another group")
            labels[g] = k
        if np.any(labels == -1):
            raise InvalidInputError("groups do not cover every coordinate")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "groups", gs)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def contiguous(cls, p: int, size: int) -> "GroupPartition":
        if size <= 0 or p % size:
            raise InvalidInputError(f"cannot split {p} coordinates into groups of {size}")
        return cls(p, [range(k, k + size) for k in range(0, p, size)])

    @classmethod
    def singletons(cls, p: int) -> "GroupPartition":
        return cls.contiguous(p, 1)

    @property
    def count(self) -> int:
        return len(self.groups)

    def coords(self, ids) -> np.ndarray:
        """Concatenated coordinates of the groups in `ids`, in group order."""
        ids = sorted(ids)
        if not ids:
            return np.zeros(0, dtype=np.intp)
        return np.concatenate([self.groups[k] for k in ids])

    def block_norms(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return np.sqrt(np.bincount(self.labels, weights=u * u, minlength=self.count))

    def to_json(self):
        return [[int(i) + 1 for i in g] for g in self.groups]

    @classmethod
    def from_json(cls, p: int, groups) -> "GroupPartition":
        return cls(p, [[int(i) - 1 for i in g] for g in groups])


def _check_len(u, P):
    u = as_vector(u, "u")
    if u.size != P.p:
        raise InvalidInputError(f"vector has length {u.size}, partition covers {P.p}")
    return u


def group_norm(u, P: GroupPartition) -> float:
    """The l1/l2 norm: sum of Euclidean norms of the blocks of `u`."""
    return float(P.block_norms(_check_len(u, P)).sum())


def group_prox(u, tau: float, P: GroupPartition) -> np.ndarray:
    """Block soft-thresholding, the prox of ``tau * ||.||_{1,2}``."""
    if tau < 0:
        raise InvalidInputError(f"tau must be nonnegative, got {tau}")
    u = _check_len(u, P)
    norms = P.block_norms(u)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(norms > tau, 1.0 - tau / norms, 0.0)
    return scale[P.labels] * u


def project_dual_ball(u, radius: float, P: GroupPartition) -> np.ndarray:
    """Project onto ``{u : ||u_J|| <= radius for every J}``."""
    norms = P.block_norms(u)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(norms > radius, radius / norms, 1.0)
    return scale[P.labels] * u


def project_l1_ball(u, radius: float, P: GroupPartition) -> np.ndarray:
    """Project onto the l1/l2 ball ``{u : sum_J ||u_J|| <= radius}``.

    The vector of block norms is projected onto the l1 ball (sort-based
    simplex projection) and each block is rescaled accordingly.
    """
    norms = P.block_norms(u)
    total = norms.sum()
    if total <= radius:
        return np.array(u, dtype=float)
    if radius <= 0:
        return np.zeros_like(u, dtype=float)
    srt = np.sort(norms)[::-1]
    css = np.cumsum(srt) - radius
    k = np.arange(1, srt.size + 1)
    idx = np.nonzero(srt - css / k > 0)[0][-1]
    theta = css[idx] / (idx + 1)
    shrunk = np.maximum(norms - theta, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(norms > 0, shrunk / norms, 0.0)
    return scale[P.labels] * u


def default_zero_tol(ybar) -> float:
    return 1e-10 * max(1.0, float(np.linalg.norm(ybar)))


def active_sets(ybar, P: GroupPartition, zero_tol: float | None = None):
    """Split groups into active ``I`` and inactive ``Ic``; build the sign vector.

    Returns
    -------
    I, Ic : tuple of int
        Group ids with ``||ybar_J|| > zero_tol`` and the rest.
    e : ndarray
        ``ybar_J / ||ybar_J||`` on active groups, zero elsewhere.
    """
    ybar = _check_len(ybar, P)
    if zero_tol is None:
        zero_tol = default_zero_tol(ybar)
    if zero_tol < 0:
        raise InvalidInputError("zero_tol must be nonnegative")
    norms = P.block_norms(ybar)
    act = norms > zero_tol
    I = tuple(int(k) for k in np.nonzero(act)[0])
    Ic = tuple(int(k) for k in np.nonzero(~act)[0])
    e = np.zeros(P.p)
    for k in I:
        g = P.groups[k]
        e[g] = ybar[g] / norms[k]
    return I, Ic, e


def hessian_block(ybar_J) -> np.ndarray:
    """Hessian of the Euclidean norm at a nonzero block.

    ``(1/r) Id - (1/r^3) y y^T`` with ``r = ||y||``.  Its kernel is the line
    through `ybar_J`.
    """
    y = as_vector(ybar_J, "ybar_J")
    r = float(np.linalg.norm(y))
    if r == 0.0:
        raise DomainError("Hessian block is undefined on a zero (inactive) group")
    return np.eye(y.size) / r - np.outer(y, y) / r**3


def classify_inactive(v, P: GroupPartition, Ic, theta: float = 0.99):
    """Split inactive groups by certificate norm: ``K`` above `theta`, ``H`` the rest."""
    if not 0.0 < theta <= 1.0:
        raise InvalidInputError(f"theta must lie in (0, 1], got {theta}")
    norms = P.block_norms(_check_len(v, P))
    K = tuple(k for k in sorted(Ic) if norms[k] > theta)
    H = tuple(k for k in sorted(Ic) if norms[k] <= theta)
    return K, H


def directional_sets(w, op, P: GroupPartition, e, Ic, zero_tol: float = 1e-8):
    """Inactive groups moved by direction `w`, and the critical-cone boundary value.

    Returns ``(Kw, Hw, boundary_value)`` where ``boundary_value`` is
    ``<e, D* w> + sum_{J in Ic} ||(D* w)_J||``; it vanishes exactly on the
    boundary of the critical cone.
    """
    dw = op.analyze(w)
    norms = P.block_norms(dw)
    Kw = tuple(k for k in sorted(Ic) if norms[k] > zero_tol)
    Hw = tuple(k for k in sorted(Ic) if norms[k] <= zero_tol)
    value = float(np.dot(e, dw) + sum(norms[k] for k in Ic))
    return Kw, Hw, value


@dataclass
class IndexReport:
    """Index sets and certificate attached to a ground-truth signal.

    ``v`` is the dual certificate in the analysis domain (``v_I = e_I``),
    ``rho`` the squared largest inactive block norm of ``v``.
    """

    ybar: np.ndarray
    e: np.ndarray
    I: tuple
    Ic: tuple
    K: tuple
    H: tuple
    v: np.ndarray
    rho: float
    w: np.ndarray | None = None
    residual: float = 0.0
