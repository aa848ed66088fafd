import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from optfabrics.arm import ee_taskmap, joint_taskmaps
from optfabrics.energization import GeometryGenerator, energize
from optfabrics.energy import euclidean_energy
from optfabrics.spec import (DimensionError, FabricError, NotPositiveDefiniteError, Potential,
                             SingularMetricError, Spec, SpecEval, TaskMap, TransformTree, canonical_sum,
                             damp_spec, evaluate_policy, fd_jacobian, force_spec, identity_map, linear_map,
                             pullback, pullback_eval, solve_metric, sum_specs, tree_resolve, zero_potential)


def const_spec(M, f):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    f = np.atleast_1d(np.asarray(f, dtype=float))
    return Spec(M.shape[0], lambda x, v: M, lambda x, v: f)


def quadratic_potential(dim):
    return Potential(dim, lambda x: 0.5 * float(x @ x), lambda x: np.array(x, dtype=float))


def smooth_map():
    """R^2 -> R^2 with a full-rank Jacobian near the origin."""

    def phi(q):
        return np.array([q[0] + 0.3 * np.sin(q[1]), q[1] + 0.2 * q[0] ** 2])

    return TaskMap(2, 2, phi, label="smooth")


# --- evaluate_policy -------------------------------------------------------


def test_policy_identity_metric():
    M, pi = evaluate_policy(const_spec(np.eye(2), [1.0, 0.0]), np.zeros(2), np.ones(2))
    assert pi == pytest.approx([-1.0, 0.0])


def test_policy_diagonal_solve():
    _, pi = evaluate_policy(const_spec(np.diag([2.0, 1.0]), [2.0, 1.0]), np.zeros(2), np.zeros(2))
    assert pi == pytest.approx([-1.0, -1.0])


def test_policy_of_energized_euclidean_is_orthogonal_projection():
    h = np.array([0.0, 2.5])
    v = np.array([1.7, 0.0])
    spec = energize(GeometryGenerator(2, lambda x, v: h), euclidean_energy(2))
    _, pi = evaluate_policy(spec, np.zeros(2), v)
    vhat = v / np.linalg.norm(v)
    assert pi == pytest.approx(-(np.eye(2) - np.outer(vhat, vhat)) @ h, abs=1e-14)


def test_singular_metric_raises():
    with pytest.raises(SingularMetricError):
        evaluate_policy(const_spec(np.zeros((2, 2)), [1.0, 0.0]), np.zeros(2), np.zeros(2))


def test_indefinite_but_invertible_metric_solves():
    M = np.diag([1.0, -2.0])
    assert solve_metric(M, np.array([1.0, 2.0])) == pytest.approx([1.0, -1.0])


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        evaluate_policy(const_spec(np.eye(2), [0.0, 0.0]), np.zeros(3), np.zeros(3))


def test_nonfinite_state_rejected():
    with pytest.raises(FabricError):
        evaluate_policy(const_spec(np.eye(2), [0.0, 0.0]), np.array([np.nan, 0.0]), np.zeros(2))


def test_asymmetric_metric_rejected():
    with pytest.raises(FabricError):
        evaluate_policy(const_spec([[1.0, 0.5], [0.0, 1.0]], [0.0, 0.0]), np.zeros(2), np.zeros(2))


# --- pullback --------------------------------------------------------------


def test_pullback_identity_is_exact(rng):
    A = rng.normal(size=(3, 3))
    M = A @ A.T + np.eye(3)
    f = rng.normal(size=3)
    ev = pullback(const_spec(M, f), identity_map(3), rng.normal(size=3), rng.normal(size=3))
    assert np.array_equal(ev.M, M)
    assert np.array_equal(ev.f, f)


def test_pullback_scalar_scaling():
    ev = pullback(const_spec([[1.0]], [0.0]), linear_map([[2.0]]), [0.3], [1.0])
    assert ev.M[0, 0] == pytest.approx(4.0)
    assert ev.f[0] == pytest.approx(0.0)


def test_pullback_two_link_arm_matches_fd_jacobian(arm2):
    tm = ee_taskmap(arm2)
    q = np.zeros(2)
    ev = pullback(const_spec(np.eye(2), [0.0, 0.0]), tm, q, np.zeros(2))
    J = fd_jacobian(tm.map_fn, q, 2, 1e-6)
    assert ev.M == pytest.approx(J.T @ J, abs=1e-8)


def test_pullback_rejects_wrong_codomain(arm3):
    with pytest.raises(DimensionError):
        pullback(const_spec(np.eye(3), np.zeros(3)), ee_taskmap(arm3), np.zeros(3), np.zeros(3))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-0.5, 0.5), min_size=2, max_size=2),
       st.lists(st.floats(-2, 2), min_size=2, max_size=2))
def test_pullback_composes(q, qd):
    q = np.array(q)
    qd = np.array(qd)
    inner = smooth_map()
    outer = linear_map([[1.0, 2.0], [-0.5, 1.5]], [0.1, -0.2])

    def metric(x, v):
        return np.array([[2.0 + x[0] ** 2, 0.3], [0.3, 1.0 + v[1] ** 2]])

    spec = Spec(2, metric, lambda x, v: np.array([x[1] * v[0], v @ v]))
    staged_mid = Spec(2, lambda y, yd: pullback(spec, outer, y, yd).M, lambda y, yd: pullback(spec, outer, y, yd).f)
    staged = pullback(staged_mid, inner, q, qd)
    direct = pullback(spec, outer.compose(inner), q, qd)
    assert staged.M == pytest.approx(direct.M, rel=1e-8, abs=1e-10)
    assert staged.f == pytest.approx(direct.f, rel=1e-8, abs=1e-8)


# --- summation -------------------------------------------------------------


def test_sum_two_copies_keeps_acceleration(rng):
    A = rng.normal(size=(2, 2))
    ev = SpecEval(A @ A.T + np.eye(2), rng.normal(size=2))
    total = sum_specs([ev, ev])
    assert total.M == pytest.approx(2 * ev.M)
    assert total.f == pytest.approx(2 * ev.f)
    assert total.accel() == pytest.approx(ev.accel())


@pytest.mark.parametrize("m1,a1,m2,a2,expected", [
    (1.0, 1.0, 1.0, 3.0, 2.0),
    (2.0, 0.0, 1.0, 3.0, 1.0),
])
def test_canonical_weighted_mean(m1, a1, m2, a2, expected):
    # natural form of xdd = a is (M, -M a)
    evs = [SpecEval(np.array([[m1]]), np.array([-m1 * a1])), SpecEval(np.array([[m2]]), np.array([-m2 * a2]))]
    _, a = canonical_sum(evs)
    assert -a[0] == pytest.approx(expected)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.floats(0.1, 10), st.floats(-5, 5)), min_size=1, max_size=6))
def test_canonical_sum_within_convex_hull(items):
    evs = [SpecEval(np.array([[m]]), np.array([-m * a])) for m, a in items]
    _, acc = canonical_sum(evs)
    accels = [a for _, a in items]
    assert min(accels) - 1e-9 <= -acc[0] <= max(accels) + 1e-9


def test_sum_commutative_and_associative(rng):
    evs = [SpecEval(rng.normal(size=(3, 3)), rng.normal(size=3)) for _ in range(3)]
    a = sum_specs([sum_specs(evs[:2]), evs[2]])
    b = sum_specs([evs[2], sum_specs([evs[1], evs[0]])])
    assert a.M == pytest.approx(b.M, abs=1e-14)
    assert a.f == pytest.approx(b.f, abs=1e-14)


def test_sum_errors():
    with pytest.raises(FabricError):
        sum_specs([])
    with pytest.raises(DimensionError):
        sum_specs([SpecEval(np.eye(2), np.zeros(2)), SpecEval(np.eye(3), np.zeros(3))])


# --- trees -----------------------------------------------------------------


def test_tree_single_identity_leaf():
    spec = const_spec(np.diag([1.0, 2.0]), [0.5, -1.0])
    ev = tree_resolve(TransformTree(2, [(identity_map(2), spec)]), np.zeros(2), np.zeros(2))
    assert ev.M == pytest.approx(np.diag([1.0, 2.0]))
    assert ev.f == pytest.approx([0.5, -1.0])


def test_tree_two_identity_leaves():
    s1 = const_spec(np.eye(2), [1.0, 0.0])
    s2 = const_spec(2 * np.eye(2), [0.0, 1.0])
    ev = tree_resolve(TransformTree(2, [(identity_map(2), s1), (identity_map(2), s2)]), np.zeros(2), np.zeros(2))
    assert ev.M == pytest.approx(3 * np.eye(2))
    assert ev.f == pytest.approx([1.0, 1.0])


def test_tree_arm_matches_hand_composition(arm3, rng):
    ee = ee_taskmap(arm3)
    limits = joint_taskmaps(arm3)
    ee_spec = Spec(2, lambda x, v: np.diag([1.0 + x[0] ** 2, 2.0]), lambda x, v: np.array([v[1], x[0]]))
    lim_spec = Spec(1, lambda x, v: np.array([[1.0 / x[0]]]), lambda x, v: np.array([-v[0] ** 2]))
    tree = TransformTree(3, [(ee, ee_spec)] + [(tm, lim_spec) for tm in limits])
    q = rng.uniform(-1, 1, 3)
    qd = rng.normal(size=3)
    got = tree_resolve(tree, q, qd)

    # hand composition: every quantity written out explicitly
    x = ee(q)
    J = fd_jacobian(ee.map_fn, q, 2, 1e-6)
    xd = J @ qd
    c = np.array([(ee.jacobian(q + 1e-6 * qd) - ee.jacobian(q - 1e-6 * qd))[i] @ qd / 2e-6 for i in range(2)])
    Mx = np.diag([1.0 + x[0] ** 2, 2.0])
    M = J.T @ Mx @ J
    f = J.T @ (np.array([xd[1], x[0]]) + Mx @ c)
    for i in range(3):
        for sign, d in ((1.0, q[i] + np.pi), (-1.0, np.pi - q[i])):
            e = np.zeros(3)
            e[i] = sign
            M += np.outer(e, e) / d
            f += e * (-(sign * qd[i]) ** 2)
    assert got.M == pytest.approx(M, rel=1e-7, abs=1e-9)
    assert got.f == pytest.approx(f, rel=1e-6, abs=1e-8)


def test_tree_rejects_mismatched_leaf(arm3):
    with pytest.raises(DimensionError):
        TransformTree(2, [(ee_taskmap(arm3), const_spec(np.eye(2), np.zeros(2)))])


def test_tree_empty_resolution_fails():
    with pytest.raises(FabricError):
        tree_resolve(TransformTree(2, []), np.zeros(2), np.zeros(2))


# --- forcing and damping ----------------------------------------------------


def test_forcing_adds_gradient():
    forced = force_spec(const_spec(np.eye(2), [0.0, 0.0]), quadratic_potential(2))
    assert forced(np.array([1.0, 0.0]), np.zeros(2)).f == pytest.approx([1.0, 0.0])


def test_forcing_zero_potential_and_minimizer(rng):
    base = Spec(2, lambda x, v: np.eye(2), lambda x, v: x + v)
    x, v = rng.normal(size=2), rng.normal(size=2)
    assert force_spec(base, zero_potential(2))(x, v).f == pytest.approx(base(x, v).f)
    assert force_spec(base, quadratic_potential(2))(np.zeros(2), v).f == pytest.approx(base(np.zeros(2), v).f)


def test_forcing_dimension_mismatch():
    with pytest.raises(DimensionError):
        force_spec(const_spec(np.eye(2), [0.0, 0.0]), quadratic_potential(3))


def test_damping_adds_velocity_term():
    damped = damp_spec(const_spec(np.eye(2), [0.0, 0.0]), lambda x, v: np.eye(2))
    assert damped(np.zeros(2), np.array([0.0, 2.0])).f == pytest.approx([0.0, 2.0])


@pytest.mark.parametrize("B", [np.zeros((2, 2)), np.diag([1.0, -1.0]), np.array([[1.0, 0.5], [0.0, 1.0]])])
def test_damping_rejects_non_spd(B):
    damped = damp_spec(const_spec(np.eye(2), [0.0, 0.0]), lambda x, v: B)
    with pytest.raises(NotPositiveDefiniteError):
        damped(np.zeros(2), np.ones(2))


def test_pullback_eval_formula(rng):
    M = np.diag([2.0, 3.0])
    f = np.array([1.0, -1.0])
    J = rng.normal(size=(2, 3))
    c = rng.normal(size=2)
    ev = pullback_eval(SpecEval(M, f), J, c)
    assert ev.M == pytest.approx(J.T @ M @ J)
    assert ev.f == pytest.approx(J.T @ (f + M @ c))


def test_potential_nonfinite_gradient_flagged():
    psi = Potential(1, lambda x: 0.0, lambda x: np.array([np.inf]))
    with pytest.raises(FabricError):
        psi.gradient(np.zeros(1))
