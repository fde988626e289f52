"""Small analytic instances with known certificates and classifications."""

from __future__ import annotations

import numpy as np

from .groups import GroupPartition
from .operators import AnalysisOperator
from .solvers import ProblemInstance


def nonsharp_stable_example() -> ProblemInstance:
    """Three coordinates, groups {1,2} and {3}: unique, stable, not sharp."""
    phi = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 1.0]])
    P = GroupPartition(3, [[0, 1], [2]])
    return ProblemInstance(phi, AnalysisOperator.identity(3), P, np.array([1.0, 1.0, 0.0]))


def strong_unstable_example() -> ProblemInstance:
    """Two pairs of coordinates: unique but not stably recoverable."""
    phi = np.array([[1.0, 0.0, 0.0, -1.0], [0.0, 1.0, 0.0, 1.0], [0.0, 0.0, 1.0, 0.0]])
    P = GroupPartition.contiguous(4, 2)
    return ProblemInstance(phi, AnalysisOperator.identity(4), P, np.array([0.0, 1.0, 0.0, 0.0]))


def four_group_example(a=(1.0, 0.0, 1.0, 0.0, 1.0),
                       b=(1.0, 0.0, -1.0, 0.0, 1.0)) -> ProblemInstance:
    """Four pairs of coordinates with tunable columns 4..8.

    `a` and `b` hold ``(a4, ..., a8)`` and ``(b4, ..., b8)``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != (5,) or b.shape != (5,):
        raise ValueError("a and b must each have five entries")
    phi = np.zeros((3, 8))
    phi[:, :3] = np.eye(3)
    phi[0, 3:] = a
    phi[1, 3::2] = 1.0
    phi[2, 3:] = b
    x0 = np.zeros(8)
    x0[1] = 1.0
    return ProblemInstance(phi, AnalysisOperator.identity(8), GroupPartition.contiguous(8, 2), x0)


GOLDEN = {
    "nonsharp_stable": nonsharp_stable_example,
    "strong_unstable": strong_unstable_example,
    "four_group_stable": lambda: four_group_example(b=(1.0, 0.0, -1.0, 0.0, 1.0)),
    "four_group_sharp": lambda: four_group_example(b=(1.0, 0.0, 1.0, 0.0, 1.0)),
}
