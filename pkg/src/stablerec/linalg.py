"""Dense linear algebra helpers.

All rank decisions go through :func:`numerical_rank`, which counts singular
values above ``rel_tol * s_max``.  The cone tests downstream reduce to rank
and nullspace questions, so every caller shares this one policy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

RANK_TOL = 1e-9


def as_matrix(A, name="A") -> np.ndarray:
    """Return `A` as a finite 2-D float array or raise InvalidInputError."""
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A.reshape(1, -1)
    if A.ndim != 2:
        raise InvalidInputError(f"{name} must be two-dimensional, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return A


def as_vector(x, name="x", size=None) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if not np.all(np.isfinite(x)):
        raise InvalidInputError(f"{name} has non-finite entries")
    if size is not None and x.size != size:
        raise InvalidInputError(f"{name} has length {x.size}, expected {size}")
    return x


def _check_tol(rel_tol):
    if not 0.0 < rel_tol < 1.0:
        raise InvalidInputError(f"rel_tol must lie in (0, 1), got {rel_tol}")


def _svd(A):
    # gesdd occasionally fails to converge on nearly rank-deficient input
    try:
        return np.linalg.svd(A, full_matrices=True)
    except np.linalg.LinAlgError:
        import scipy.linalg

        return scipy.linalg.svd(A, full_matrices=True, lapack_driver="gesvd")


def numerical_rank(s: np.ndarray, rel_tol: float = RANK_TOL) -> int:
    """Number of singular values in `s` exceeding ``rel_tol * max(s)``."""
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > rel_tol * s[0]))


def nullspace_basis(A, rel_tol: float = RANK_TOL) -> np.ndarray:
    """Orthonormal basis of ``Ker A``, one basis vector per column.

    Parameters
    ----------
    A : array_like, shape (m, n)
    rel_tol : float
        Singular values at or below ``rel_tol * s_max`` count as zero.

    Returns
    -------
    B : ndarray, shape (n, n - rank)
    """
    _check_tol(rel_tol)
    A = as_matrix(A)
    if A.shape[1] == 0:
        return np.zeros((0, 0))
    if A.shape[0] == 0:
        return np.eye(A.shape[1])
    _, s, vt = _svd(A)
    r = numerical_rank(s, rel_tol)
    return vt[r:].T.copy()


def orthonormal_range_basis(A, rel_tol: float = RANK_TOL) -> np.ndarray:
    """Orthonormal basis of the column span of `A` (columns of the result)."""
    _check_tol(rel_tol)
    A = as_matrix(A)
    if A.size == 0:
        return np.zeros((A.shape[0], 0))
    u, s, _ = _svd(A)
    r = numerical_rank(s, rel_tol)
    return u[:, :r].copy()


def matrix_rank(A, rel_tol: float = RANK_TOL) -> int:
    A = as_matrix(A)
    if A.size == 0:
        return 0
    return numerical_rank(np.linalg.svd(A, compute_uv=False), rel_tol)


@dataclass(frozen=True)
class LinearSolve:
    """Outcome of :func:`min_norm_solve`.

    ``x`` is the minimum-norm least-squares solution; it solves the system
    only when ``feasible`` is true.
    """

    x: np.ndarray
    residual: float
    feasible: bool


def pseudo_inverse(A, rel_tol: float = RANK_TOL) -> np.ndarray:
    """Moore-Penrose inverse with the package rank policy."""
    A = as_matrix(A)
    if A.size == 0:
        return np.zeros((A.shape[1], A.shape[0]))
    u, s, vt = np.linalg.svd(A, full_matrices=False)
    r = numerical_rank(s, rel_tol)
    return (vt[:r].T / s[:r]) @ u[:, :r].T


def min_norm_solve(A, b, tol: float = 1e-9, rel_tol: float = RANK_TOL) -> LinearSolve:
    """Minimum-norm solution of ``A x = b``.

    The system counts as feasible when the least-squares residual is at most
    ``tol * (1 + ||b||)``.
    """
    A = as_matrix(A)
    b = np.asarray(b, dtype=float).ravel()
    if b.size != A.shape[0]:
        raise InvalidInputError(
            f"right-hand side has length {b.size}, matrix has {A.shape[0]} rows"
        )
    if not np.all(np.isfinite(b)):
        raise InvalidInputError("b has non-finite entries")
    x = pseudo_inverse(A, rel_tol) @ b
    res = float(np.linalg.norm(A @ x - b))
    return LinearSolve(x=x, residual=res, feasible=res <= tol * (1.0 + np.linalg.norm(b)))
