import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from stablerec.errors import DomainError, InvalidInputError
from stablerec.groups import (
    GroupPartition,
    active_sets,
    classify_inactive,
    directional_sets,
    group_norm,
    group_prox,
    hessian_block,
    project_dual_ball,
    project_l1_ball,
)
from stablerec.operators import AnalysisOperator

P3 = GroupPartition(3, [[0, 1], [2]])
P4 = GroupPartition.contiguous(4, 2)


def test_partition_validation():
    with pytest.raises(InvalidInputError):
        GroupPartition(3, [[0, 1], [1, 2]])
    with pytest.raises(InvalidInputError):
        GroupPartition(3, [[0, 1]])
    with pytest.raises(InvalidInputError):
        GroupPartition(3, [[0, 1, 2], []])


def test_partition_json_is_one_based():
    assert P3.to_json() == [[1, 2], [3]]
    Q = GroupPartition.from_json(3, [[1, 2], [3]])
    assert [g.tolist() for g in Q.groups] == [[0, 1], [2]]


def test_group_norm_examples():
    assert group_norm(np.array([1.0, 1, 0]), P3) == pytest.approx(np.sqrt(2))
    assert group_norm(np.zeros(3), P3) == 0.0
    assert group_norm(np.array([3.0, 4, 0, 5]), P4) == pytest.approx(10.0)
    with pytest.raises(InvalidInputError):
        group_norm(np.ones(5), P4)


def test_group_prox_examples():
    P = GroupPartition(2, [[0, 1]])
    np.testing.assert_allclose(group_prox(np.array([3.0, 4]), 5.0, P), [0, 0])
    np.testing.assert_allclose(group_prox(np.array([3.0, 4]), 0.0, P), [3, 4])
    np.testing.assert_allclose(group_prox(np.array([3.0, 4]), 2.5, P), [1.5, 2.0])
    with pytest.raises(InvalidInputError):
        group_prox(np.array([3.0, 4]), -1.0, P)


vec6 = arrays(np.float64, 6, elements=st.floats(-5, 5, allow_nan=False))


@settings(max_examples=100, deadline=None)
@given(vec6, st.floats(0.0, 4.0))
def test_prox_optimality_inclusion(u, tau):
    P = GroupPartition.contiguous(6, 2)
    x = group_prox(u, tau, P)
    r = u - x
    for g in P.groups:
        nx = np.linalg.norm(x[g])
        if nx > 0:
            np.testing.assert_allclose(r[g], tau * x[g] / nx, atol=1e-10)
        else:
            assert np.linalg.norm(r[g]) <= tau + 1e-10


@settings(max_examples=100, deadline=None)
@given(vec6, vec6, st.floats(-3, 3))
def test_group_norm_is_a_norm(u, v, a):
    P = GroupPartition.contiguous(6, 3)
    assert group_norm(a * u, P) == pytest.approx(abs(a) * group_norm(u, P), abs=1e-12)
    assert group_norm(u + v, P) <= group_norm(u, P) + group_norm(v, P) + 1e-12


def test_prox_matches_finite_difference_minimizer(rng):
    """Prox minimizes tau*||x|| + 0.5||x - u||^2: no random nearby point does better."""
    P = GroupPartition.contiguous(6, 3)
    for _ in range(20):
        u = rng.standard_normal(6)
        tau = rng.uniform(0, 2)
        x = group_prox(u, tau, P)
        f = lambda z: tau * group_norm(z, P) + 0.5 * np.sum((z - u) ** 2)  # noqa: E731
        for _ in range(50):
            assert f(x) <= f(x + 1e-6 * rng.standard_normal(6)) + 1e-15


def test_dual_ball_and_l1_ball_projections(rng):
    P = GroupPartition.contiguous(6, 2)
    u = rng.standard_normal(6) * 3
    p = project_dual_ball(u, 1.0, P)
    assert P.block_norms(p).max() <= 1 + 1e-12
    q = project_l1_ball(u, 1.0, P)
    assert P.block_norms(q).sum() == pytest.approx(1.0)
    # Moreau: u = prox_{||.||_{inf,2}}(u) + P_{l1 ball}(u); check via KKT of the projection
    r = u - q
    lam = P.block_norms(r).max()
    for k, g in enumerate(P.groups):
        if np.linalg.norm(q[g]) > 1e-12:
            assert np.linalg.norm(r[g]) == pytest.approx(lam, rel=1e-9)


def test_active_sets_examples():
    I, Ic, e = active_sets(np.array([1.0, 1, 0]), P3)
    assert I == (0,) and Ic == (1,)
    np.testing.assert_allclose(e, [1 / np.sqrt(2), 1 / np.sqrt(2), 0])
    I, Ic, e = active_sets(np.zeros(3), P3)
    assert I == () and np.all(e == 0)
    I, Ic, e = active_sets(np.array([0.0, 1, 0, 0]), P4)
    assert I == (0,)
    np.testing.assert_allclose(e, [0, 1, 0, 0])


def test_hessian_block_examples():
    np.testing.assert_allclose(hessian_block([0.0, 1.0]), [[1, 0], [0, 0]], atol=1e-15)
    np.testing.assert_allclose(hessian_block([1.0, 1.0]) @ [1.0, 1.0], 0, atol=1e-15)
    y = np.array([0.3, -1.2, 2.0])
    np.testing.assert_allclose(hessian_block(2 * y), 0.5 * hessian_block(y), atol=1e-15)
    with pytest.raises(DomainError):
        hessian_block([0.0, 0.0])


def test_hessian_block_matches_finite_differences(rng):
    h = 1e-4
    for _ in range(30):
        y = rng.standard_normal(3)
        y *= max(1.0, 0.1 / np.linalg.norm(y))
        grad = lambda z: z / np.linalg.norm(z)  # noqa: E731
        fd = np.column_stack([(grad(y + h * e) - grad(y - h * e)) / (2 * h) for e in np.eye(3)])
        np.testing.assert_allclose(hessian_block(y), fd, atol=1e-6)


def test_classify_inactive_examples():
    v_nonsharp = np.array([1, 1, 0]) / np.sqrt([2, 2, 1])
    assert classify_inactive(v_nonsharp, P3, (1,)) == ((), (1,))
    assert classify_inactive(np.array([0.0, 1, 0, 1]), P4, (1,)) == ((1,), ())
    assert classify_inactive(np.array([0.0, 1, 0, 0]), P4, (1,)) == ((), (1,))


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, 8, elements=st.floats(0, 1.2)), st.floats(0.01, 1.0),
       st.floats(0.01, 1.0))
def test_classify_inactive_monotone_in_theta(v, t1, t2):
    P = GroupPartition.contiguous(8, 2)
    lo, hi = sorted((t1, t2))
    K_lo, _ = classify_inactive(v, P, (0, 1, 2, 3), lo)
    K_hi, _ = classify_inactive(v, P, (0, 1, 2, 3), hi)
    assert set(K_hi) <= set(K_lo)


def test_directional_sets_examples():
    op4 = AnalysisOperator.identity(4)
    Kw, Hw, val = directional_sets(np.array([1.0, -1, 0, 1]), op4, P4,
                                   np.array([0.0, 1, 0, 0]), (1,))
    assert val == pytest.approx(0.0) and Kw == (1,)
    Kw, Hw, val = directional_sets(np.zeros(4), op4, P4, np.array([0.0, 1, 0, 0]), (1,))
    assert val == 0.0 and Kw == () and Hw == (1,)
    e = np.array([1, 1, 0]) / np.sqrt([2, 2, 1])
    Kw, Hw, val = directional_sets(np.array([1.0, -1, 0]), AnalysisOperator.identity(3), P3,
                                   e, (1,))
    assert val == pytest.approx(0.0, abs=1e-15) and Kw == ()
