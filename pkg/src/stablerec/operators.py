"""Analysis operators: identity, isotropic 2-D forward differences, explicit matrix.

``analyze`` applies ``D*`` (signal -> analysis domain) and ``synthesize``
applies ``D``.  Images are vectorized row-major.  The gradient output is
interleaved per pixel, ``[(grad x)^1_00, (grad x)^2_00, (grad x)^1_01, ...]``,
so pixel ``k`` owns coordinates ``2k`` and ``2k + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidInputError, ResourceError
from .groups import GroupPartition
from .linalg import as_matrix, as_vector

DENSE_BUDGET = 25_000_000


@dataclass(frozen=True, eq=False)
class AnalysisOperator:
    kind: str
    n: int
    p: int
    shape: tuple = ()
    matrix: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def identity(cls, n: int) -> "AnalysisOperator":
        return cls("identity", int(n), int(n))

    @classmethod
    def gradient2d(cls, n1: int, n2: int) -> "AnalysisOperator":
        if n1 < 1 or n2 < 1:
            raise InvalidInputError("image dimensions must be positive")
        return cls("gradient2d", n1 * n2, 2 * n1 * n2, (int(n1), int(n2)))

    @classmethod
    def explicit(cls, D) -> "AnalysisOperator":
        D = as_matrix(D, "D")
        D.setflags(write=False)
        return cls("explicit", D.shape[0], D.shape[1], matrix=D)

    def analyze(self, x) -> np.ndarray:
        """``D* x``."""
        x = as_vector(x, "x", self.n)
        if self.kind == "identity":
            return x.copy()
        if self.kind == "explicit":
            return self.matrix.T @ x
        n1, n2 = self.shape
        img = x.reshape(n1, n2)
        g = np.zeros((n1, n2, 2))
        g[:-1, :, 0] = img[1:] - img[:-1]
        g[:, :-1, 1] = img[:, 1:] - img[:, :-1]
        return g.ravel()

    def synthesize(self, u) -> np.ndarray:
        """``D u``, the exact adjoint of :meth:`analyze`."""
        u = as_vector(u, "u", self.p)
        if self.kind == "identity":
            return u.copy()
        if self.kind == "explicit":
            return self.matrix @ u
        n1, n2 = self.shape
        g = u.reshape(n1, n2, 2)
        x = np.zeros((n1, n2))
        x[1:] += g[:-1, :, 0]
        x[:-1] -= g[:-1, :, 0]
        x[:, 1:] += g[:, :-1, 1]
        x[:, :-1] -= g[:, :-1, 1]
        return x.ravel()

    def materialize(self, budget: int = DENSE_BUDGET) -> np.ndarray:
        """Dense ``n x p`` matrix of ``D``."""
        if self.n * self.p > budget:
            raise ResourceError(
                f"dense {self.n}x{self.p} operator exceeds budget of {budget} entries"
            )
        if self.kind == "identity":
            return np.eye(self.n)
        if self.kind == "explicit":
            return np.array(self.matrix)
        D = np.empty((self.n, self.p))
        for j in range(self.p):
            unit = np.zeros(self.p)
            unit[j] = 1.0
            D[:, j] = self.synthesize(unit)
        return D

    def default_partition(self) -> GroupPartition:
        """Singletons for identity/explicit, per-pixel pairs for the gradient."""
        if self.kind == "gradient2d":
            return GroupPartition.contiguous(self.p, 2)
        return GroupPartition.singletons(self.p)

    def to_json(self) -> dict:
        if self.kind == "identity":
            return {"kind": "identity", "n": self.n}
        if self.kind == "gradient2d":
            return {"kind": "gradient2d", "n1": self.shape[0], "n2": self.shape[1]}
        return {"kind": "explicit", "matrix": self.matrix.tolist()}

    @classmethod
    def from_json(cls, doc: dict, n: int | None = None) -> "AnalysisOperator":
        kind = doc.get("kind")
        if kind == "identity":
            size = doc.get("n", n)
            if size is None:
                raise InvalidInputError("identity operator needs a size")
            return cls.identity(int(size))
        if kind == "gradient2d":
            return cls.gradient2d(int(doc["n1"]), int(doc["n2"]))
        if kind == "explicit":
            return cls.explicit(doc["matrix"])
        raise InvalidInputError(f"unknown analysis operator kind {kind!r}")


def read_pgm(path) -> np.ndarray:
    """Read a plain-text ("P2") PGM file; values scaled to [0, 1]."""
    tokens = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0]
        tokens.extend(line.split())
    if not tokens or tokens[0] != "P2":
        raise InvalidInputError(f"{path}: not a plain PGM (P2) file")
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
        pixels = np.array([int(t) for t in tokens[4:]], dtype=float)
    except ValueError as exc:
        raise InvalidInputError(f"{path}: malformed PGM header or data") from exc
    if maxval <= 0 or pixels.size != width * height:
        raise InvalidInputError(f"{path}: expected {width * height} pixels, got {pixels.size}")
    return (pixels / maxval).reshape(height, width)


def write_pgm(path, image, maxval: int = 255):
    img = np.clip(np.asarray(image, dtype=float), 0.0, 1.0)
    vals = np.rint(img * maxval).astype(int)
    rows = [" ".join(str(v) for v in row) for row in vals]
    Path(path).write_text(
        f"P2\n{img.shape[1]} {img.shape[0]}\n{maxval}\n" + "\n".join(rows) + "\n"
    )
