from types import SimpleNamespace

import cvxpy as cp
import numpy as np
import pytest

from stablerec.errors import InvalidInputError, NoCertificateError
from stablerec.groups import GroupPartition, active_sets, group_norm
from stablerec.operators import AnalysisOperator
from stablerec.solvers import (
    ProblemInstance,
    SolverConfig,
    adversarial_sequence,
    bp_kkt_residual,
    solve_basis_pursuit,
    solve_tikhonov,
    source_coefficient,
    stability_probe,
    verify_tikhonov_optimality,
)


def closed_form_nonsharp(y, mu):
    x12 = 0.25 * (y[0] + y[1] - mu / np.sqrt(2))
    return np.array([x12, x12, 0.0])


def random_group_instance(rng, n=12, m=8, size=3, active=2, op=None):
    P = GroupPartition.contiguous(n, size)
    x0 = np.zeros(n)
    for k in rng.choice(P.count, active, replace=False):
        x0[P.groups[k]] = rng.standard_normal(size)
    return ProblemInstance(rng.standard_normal((m, n)), op or AnalysisOperator.identity(n), P, x0)


def cvx_source_coefficient(inst):
    D = inst.op.materialize()
    P = inst.partition
    rep = SimpleNamespace()
    rep.I, rep.Ic, rep.e = active_sets(inst.op.analyze(inst.x0), P)
    z = cp.Variable(inst.op.p)
    w = cp.Variable(inst.m)
    t = cp.Variable()
    cons = [D @ (z + rep.e) + inst.phi.T @ w == 0]
    cons += [z[P.groups[k]] == 0 for k in rep.I]
    cons += [cp.norm(z[P.groups[k]]) <= t for k in rep.Ic]
    cp.Problem(cp.Minimize(t), cons).solve(solver="CLARABEL")
    return t.value**2


# -------------------------------------------------------------- instances


def test_instance_recomputes_y0(nonsharp_stable):
    np.testing.assert_array_equal(nonsharp_stable.y0, [2.0, 2.0])


def test_instance_dimension_checks():
    with pytest.raises(InvalidInputError):
        ProblemInstance(
            np.ones((2, 3)), AnalysisOperator.identity(4), GroupPartition.singletons(4), np.ones(4)
        )
    with pytest.raises(InvalidInputError):
        ProblemInstance(
            np.ones((2, 3)), AnalysisOperator.identity(3), GroupPartition.singletons(4), np.ones(3)
        )


# -------------------------------------------------------------- basis pursuit


def test_bp_nonsharp_stable(nonsharp_stable):
    r = solve_basis_pursuit(nonsharp_stable)
    assert r.converged and r.kkt_residual <= 1e-8
    assert np.linalg.norm(r.x - nonsharp_stable.x0) <= 1e-5


def test_bp_strong_unstable(strong_unstable):
    r = solve_basis_pursuit(strong_unstable)
    assert r.converged
    assert np.linalg.norm(r.x - strong_unstable.x0) <= 1e-5


def test_bp_zero_observation(nonsharp_stable):
    inst = ProblemInstance(
        nonsharp_stable.phi, nonsharp_stable.op, nonsharp_stable.partition, np.zeros(3)
    )
    r = solve_basis_pursuit(inst)
    assert r.converged and np.all(r.x == 0)


@pytest.mark.parametrize("seed", range(6))
def test_bp_matches_cvxpy_total_variation(seed):
    rng = np.random.default_rng(seed)
    op = AnalysisOperator.gradient2d(4, 4)
    P = op.default_partition()
    x0 = np.zeros(16)
    x0[5:7] = 1.0
    x0[9:11] = 1.0
    inst = ProblemInstance(rng.standard_normal((int(rng.integers(5, 12)), 16)), op, P, x0)
    r = solve_basis_pursuit(inst)
    assert r.converged
    x = cp.Variable(16)
    D = op.materialize()
    obj = sum(cp.norm((D.T @ x)[g]) for g in P.groups)
    prob = cp.Problem(cp.Minimize(obj), [inst.phi @ x == inst.y0])
    prob.solve(solver="CLARABEL")
    assert r.objective <= prob.value + 1e-6
    assert np.linalg.norm(inst.phi @ r.x - inst.y0) <= 1e-8


def test_bp_reports_nonconvergence(rng):
    inst = random_group_instance(rng, n=30, m=6, active=3)
    r = solve_basis_pursuit(inst, SolverConfig(max_iter=50, polish=False))
    assert not r.converged and r.kkt_residual > 1e-8


def test_bp_kkt_residual_detects_suboptimal_points(nonsharp_stable):
    assert bp_kkt_residual(nonsharp_stable, nonsharp_stable.x0) <= 1e-12
    # a feasible but suboptimal point
    assert (
        bp_kkt_residual(nonsharp_stable, nonsharp_stable.x0 + 0.3 * np.array([1.0, -1, 0])) > 1e-3
    )


# -------------------------------------------------------------- Tikhonov


def test_tikhonov_closed_form(nonsharp_stable):
    y = np.array([2.0, 2.0])
    r = solve_tikhonov(nonsharp_stable.phi, nonsharp_stable.op, nonsharp_stable.partition, y, 0.1)
    assert r.converged
    np.testing.assert_allclose(r.x, closed_form_nonsharp(y, 0.1), atol=1e-6)
    assert r.x[0] == pytest.approx(0.982322, abs=1e-6)


def test_tikhonov_zero_data(nonsharp_stable):
    r = solve_tikhonov(
        nonsharp_stable.phi, nonsharp_stable.op, nonsharp_stable.partition, np.zeros(2), 0.3
    )
    assert np.all(r.x == 0) and r.converged


def test_tikhonov_random_against_cvxpy(rng):
    for op_kind in ("identity", "explicit"):
        phi = rng.standard_normal((4, 6))
        P = GroupPartition.contiguous(6, 2)
        op = (
            AnalysisOperator.identity(6)
            if op_kind == "identity"
            else AnalysisOperator.explicit(rng.standard_normal((6, 6)))
        )
        y = rng.standard_normal(4)
        r = solve_tikhonov(phi, op, P, y, 0.05)
        assert r.converged and r.kkt_residual <= 1e-8
        assert verify_tikhonov_optimality(r.x, y, 0.05, phi, op, P) <= 1e-8
        x = cp.Variable(6)
        D = op.materialize()
        obj = 0.5 * cp.sum_squares(phi @ x - y) + 0.05 * sum(
            cp.norm((D.T @ x)[g]) for g in P.groups
        )
        prob = cp.Problem(cp.Minimize(obj), [])
        prob.solve(solver="CLARABEL")
        mine = 0.5 * np.sum((phi @ r.x - y) ** 2) + 0.05 * group_norm(op.analyze(r.x), P)
        assert mine <= prob.value + 1e-7


def test_tikhonov_objective_monotone_for_group_lasso(rng):
    inst = random_group_instance(rng, n=30, m=15)
    y = inst.y0 + 0.05 * rng.standard_normal(15)
    r = solve_tikhonov(
        inst.phi,
        inst.op,
        inst.partition,
        y,
        0.02,
        SolverConfig(check_every=1, polish=False, max_iter=3000),
    )
    h = np.array(r.history)
    assert h.size > 10
    assert np.all(np.diff(h) <= 1e-12 * (1 + np.abs(h[:-1])))


def test_tikhonov_rejects_nonpositive_mu(nonsharp_stable):
    with pytest.raises(InvalidInputError):
        solve_tikhonov(
            nonsharp_stable.phi,
            nonsharp_stable.op,
            nonsharp_stable.partition,
            nonsharp_stable.y0,
            0.0,
        )


def test_verify_closed_form_and_trivial_cases(nonsharp_stable):
    y = np.array([2.0, 2.0])
    x = closed_form_nonsharp(y, 0.1)
    assert (
        verify_tikhonov_optimality(
            x, y, 0.1, nonsharp_stable.phi, nonsharp_stable.op, nonsharp_stable.partition
        )
        <= 1e-9
    )
    assert (
        verify_tikhonov_optimality(
            np.zeros(3),
            np.zeros(2),
            1e6,
            nonsharp_stable.phi,
            nonsharp_stable.op,
            nonsharp_stable.partition,
        )
        == 0.0
    )
    # perturb along a direction outside Ker phi
    bad = x + 0.1 * np.array([0.0, 0.0, 1.0])
    res = verify_tikhonov_optimality(
        bad, y, 0.1, nonsharp_stable.phi, nonsharp_stable.op, nonsharp_stable.partition
    )
    assert res > 1e-3
    # hand evaluation: first block misses by (-0.1, -0.1), third by -(0.1 + 0.0646447)
    r2 = 2 * x[0] + 0.1 - 2.0
    assert res == pytest.approx(np.sqrt(0.02 + (0.1 + r2) ** 2), rel=1e-9)


def test_verify_general_operator_matches_identity(nonsharp_stable):
    y = np.array([2.0, 2.1])
    r = solve_tikhonov(nonsharp_stable.phi, nonsharp_stable.op, nonsharp_stable.partition, y, 0.1)
    ex = AnalysisOperator.explicit(np.eye(3))
    res = verify_tikhonov_optimality(
        r.x, y, 0.1, nonsharp_stable.phi, ex, nonsharp_stable.partition
    )
    assert res <= 1e-8
    bad = r.x + np.array([0.0, 0.0, 0.1])
    a = verify_tikhonov_optimality(
        bad, y, 0.1, nonsharp_stable.phi, nonsharp_stable.op, nonsharp_stable.partition
    )
    b = verify_tikhonov_optimality(bad, y, 0.1, nonsharp_stable.phi, ex, nonsharp_stable.partition)
    assert a == pytest.approx(b, rel=1e-6)


# -------------------------------------------------------------- certificate


def test_source_coefficient_nonsharp_stable(nonsharp_stable):
    rep = source_coefficient(nonsharp_stable)
    assert rep.rho == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(rep.v, [1 / np.sqrt(2), 1 / np.sqrt(2), 0], atol=1e-12)
    assert rep.K == () and rep.H == (1,)
    assert rep.residual <= 1e-12


def test_source_coefficient_strong_unstable(strong_unstable):
    rep = source_coefficient(strong_unstable)
    assert rep.rho == pytest.approx(1.0, abs=1e-6)
    np.testing.assert_allclose(rep.v, [0, 1, 0, 1], atol=1e-9)
    assert rep.K == (1,)


def test_source_coefficient_invertible_phi(rng):
    x0 = rng.standard_normal(5)
    x0[2] = 0.0
    inst = ProblemInstance(
        np.eye(5), AnalysisOperator.identity(5), GroupPartition.singletons(5), x0
    )
    assert source_coefficient(inst).rho == 0.0


def test_source_coefficient_infeasible():
    inst = ProblemInstance(
        np.array([[1.0, 0.0]]),
        AnalysisOperator.identity(2),
        GroupPartition.singletons(2),
        np.array([1.0, 1.0]),
    )
    with pytest.raises(NoCertificateError):
        source_coefficient(inst)


@pytest.mark.parametrize("seed", range(8))
def test_source_coefficient_matches_cvxpy(seed):
    rng = np.random.default_rng(seed)
    if seed % 2:
        op = AnalysisOperator.gradient2d(4, 4)
        x0 = np.zeros(16)
        x0[[5, 6, 9, 10]] = 1.0
        inst = ProblemInstance(rng.standard_normal((12, 16)), op, op.default_partition(), x0)
    else:
        inst = random_group_instance(rng, n=24, m=16, size=3, active=2)
    want = cvx_source_coefficient(inst)
    if want > 1 + 1e-5:
        # no certificate inside the unit balls: x0 is not a minimizer
        with pytest.raises(NoCertificateError):
            source_coefficient(inst)
        return
    rep = source_coefficient(inst)
    assert rep.rho == pytest.approx(want, abs=1e-6)
    np.testing.assert_array_equal(rep.v[rep.e != 0], rep.e[rep.e != 0])
    assert rep.residual <= 1e-8


@pytest.mark.parametrize("seed", range(5))
def test_source_coefficient_invariant_under_row_mixing(seed):
    rng = np.random.default_rng(seed)
    inst = random_group_instance(rng, n=24, m=16, size=3, active=2)
    Q, _ = np.linalg.qr(rng.standard_normal((16, 16)))
    mixed = ProblemInstance(Q @ inst.phi, inst.op, inst.partition, inst.x0)
    assert source_coefficient(mixed).rho == pytest.approx(source_coefficient(inst).rho, abs=1e-6)


# -------------------------------------------------------------- stability


def test_probe_empty_delta_list(nonsharp_stable):
    res = stability_probe(nonsharp_stable, 1.0, [], 5)
    assert res.rows == [] and res.max_ratio == 0.0


def test_probe_nonsharp_stable_bounded(nonsharp_stable):
    res = stability_probe(nonsharp_stable, 1.0, [1e-1, 1e-2, 1e-3, 1e-4], 20, seed=0)
    assert res.failures == 0
    assert res.max_ratio <= 10.0
    for row in res.rows:
        assert row.mu == pytest.approx(1.0 * row.delta)


def test_probe_rejects_bad_arguments(nonsharp_stable):
    with pytest.raises(InvalidInputError):
        stability_probe(nonsharp_stable, 0.0, [1e-2])
    with pytest.raises(InvalidInputError):
        stability_probe(nonsharp_stable, 1.0, [-1e-2])


def test_adversarial_single_step():
    (step,) = adversarial_sequence(1.0, [0.01])
    assert step.residual <= 1e-8
    assert step.mu == pytest.approx(np.linalg.norm(step.x - step.x) + step.mu)
    np.testing.assert_allclose(np.linalg.norm(step.direction[2:]), 1.0)


def test_adversarial_ratios_grow():
    steps = adversarial_sequence(1.0, [1e-1, 1e-2, 1e-3, 1e-4])
    ratios = [s.ratio for s in steps]
    assert all(b > a for a, b in zip(ratios, ratios[1:]))
    assert all(s.residual <= 1e-8 for s in steps)
    # the ratio scales like t^{-1/2}
    assert ratios[-1] / ratios[-2] == pytest.approx(np.sqrt(10), rel=0.05)


def test_adversarial_sequence_is_solver_consistent(strong_unstable):
    (step,) = adversarial_sequence(0.5, [0.05])
    r = solve_tikhonov(
        strong_unstable.phi, strong_unstable.op, strong_unstable.partition, step.y, step.mu
    )
    assert r.converged
    np.testing.assert_allclose(r.x, step.x, atol=1e-6)


@pytest.mark.parametrize("t", [0.0, -0.1, 1.0, 2.0])
def test_adversarial_rejects_out_of_range(t):
    with pytest.raises(InvalidInputError):
        adversarial_sequence(1.0, [t])
