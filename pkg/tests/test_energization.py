import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from optfabrics.arm import default_arm, ee_taskmap
from optfabrics.checks import READY_Q, random_spd, reach_fabric, shipped_terms
from optfabrics.energization import (VELOCITY_GUARD, GeometryGenerator, ZeroVelocityError, bent_generator,
                                     check_hd2, energization_coefficient, energize, hd2_violation, projector,
                                     projector_eval)
from optfabrics.energy import energy_rate, euclidean_energy, pulled_energy, riemannian_energy
from optfabrics.fabric import damped_accel
from optfabrics.simulate import rollout
from optfabrics.spec import evaluate_policy, pullback
from optfabrics.terms import soft_distance_field


def curved_energy():
    def G(x):
        return np.array([[2.0 + np.sin(x[0]), 0.4 * x[1]], [0.4 * x[1], 1.5 + x[1] ** 2]])

    def dG(x):
        d = np.zeros((2, 2, 2))
        d[0, 0, 0] = np.cos(x[0])
        d[0, 1, 1] = d[1, 0, 1] = 0.4
        d[1, 1, 1] = 2 * x[1]
        return d

    return riemannian_energy(2, G, dG, label="curved")


def swirl():
    """An HD2 generator mixing position and velocity."""
    return GeometryGenerator(2, lambda x, v: float(v @ v) * np.array([x[1], -x[0]]) + v[0] * v[1] * np.ones(2))


def test_projector_euclidean():
    v = np.array([3.0, 4.0])
    P, _ = projector(euclidean_energy(2), np.zeros(2), v)
    vhat = v / 5
    assert P == pytest.approx(np.eye(2) - np.outer(vhat, vhat))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_projector_identities(seed, dim):
    rng = np.random.default_rng(seed)
    M = random_spd(rng, dim)
    v, w = rng.normal(size=dim), rng.normal(size=dim)
    P, R = projector_eval(M, v)
    assert np.max(np.abs(P @ P - P)) < 1e-10
    assert abs(v @ P @ w) < 1e-10
    assert P == pytest.approx(M @ R)


def test_projector_undefined_at_rest():
    with pytest.raises(ZeroVelocityError):
        projector(euclidean_energy(2), np.zeros(2), np.zeros(2))


def test_alpha_orthogonal_h():
    assert energization_coefficient([0.0, 1.0], euclidean_energy(2), [0, 0], [2.0, 0.0]) == pytest.approx(0.0)


def test_alpha_parallel_h():
    assert energization_coefficient([1.0, 0.0], euclidean_energy(2), [0, 0], [1.0, 0.0]) == pytest.approx(-1.0)


def test_alpha_bisection_oracle(rng):
    E = curved_energy()
    for _ in range(30):
        x, v, h = rng.uniform(-1, 1, 2), rng.normal(size=2), 2 * rng.normal(size=2)

        def rate(a):
            return energy_rate(E, x, v, -h - a * v)

        lo, hi = -1.0, 1.0
        while rate(lo) * rate(hi) > 0:
            lo, hi = 2 * lo, 2 * hi
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if rate(lo) * rate(mid) <= 0:
                hi = mid
            else:
                lo = mid
        assert energization_coefficient(h, E, x, v) == pytest.approx(0.5 * (lo + hi), abs=1e-8)


def test_energized_euclidean_is_orthogonal_projection(rng):
    g = swirl()
    for _ in range(10):
        x, v = rng.normal(size=2), rng.normal(size=2)
        _, pi = evaluate_policy(energize(g, euclidean_energy(2)), x, v)
        vhat = v / np.linalg.norm(v)
        assert pi == pytest.approx(-(np.eye(2) - np.outer(vhat, vhat)) @ g(x, v), abs=1e-12)


def test_energized_change_is_along_velocity(rng):
    E, g = curved_energy(), swirl()
    x, v = rng.normal(size=2), rng.normal(size=2)
    _, pi = evaluate_policy(energize(g, E), x, v)
    diff = pi + g(x, v)
    assert abs(diff[0] * v[1] - diff[1] * v[0]) < 1e-10


def test_energized_policy_conserves_energy(rng):
    E, g = curved_energy(), swirl()
    x, v = rng.normal(size=2), rng.normal(size=2)
    _, pi = evaluate_policy(energize(g, E), x, v)
    assert energy_rate(E, x, v, pi) == pytest.approx(0.0, abs=1e-10)


def test_energized_rollout_conserves_energy():
    E, spec = curved_energy(), energize(swirl(), curved_energy())

    def accel(t, x, v):
        return evaluate_policy(spec, x, v)[1]

    traj = rollout(accel, (0.0, [0.2, 0.1], [0.5, -0.3]), 1e-3, 10.0, record=lambda t, x, v: {"H": E.value(x, v)})
    H = traj.channel("H")
    assert np.max(np.abs(H - H[0])) / H[0] < 1e-6


def test_zero_velocity_falls_back_to_raw_policy():
    g = swirl()
    spec = energize(g, curved_energy())
    v = np.full(2, VELOCITY_GUARD / 10)
    _, pi = evaluate_policy(spec, np.array([0.3, 0.2]), v)
    assert pi == pytest.approx(-g(np.array([0.3, 0.2]), v), abs=1e-30)
    _, pi0 = evaluate_policy(spec, np.array([0.3, 0.2]), np.zeros(2))
    assert np.array_equal(pi0, np.zeros(2))


@pytest.mark.parametrize("alpha", [0.5, 2.0])
def test_bent_generator_is_hd2(alpha, rng):
    bent = bent_generator(swirl(), curved_energy())
    for _ in range(20):
        x, v = rng.normal(size=2), rng.normal(size=2)
        h = bent(x, v)
        assert np.linalg.norm(bent(x, alpha * v) - alpha ** 2 * h) <= 1e-8 * (1 + alpha ** 2 * np.linalg.norm(h))


def test_hd2_check_flags_offset_generator():
    bad = GeometryGenerator(2, lambda x, v: float(v @ v) * x + 0.1)
    assert check_hd2(bad, 20) > 1e-2
    assert hd2_violation(swirl(), np.ones(2), np.array([0.3, -2.0])) < 1e-12


def test_energize_then_pullback_commutes(arm3, rng):
    tm = ee_taskmap(arm3)
    term = shipped_terms()[1][1]  # Gaussian-weighted attractor on the end effector
    E, g = term.energy, term.generator
    E_root = pulled_energy(E, tm)
    for _ in range(10):
        q, qd = rng.uniform(-2, 2, 3), rng.normal(size=3)
        x, xd, J, c = tm.evaluate(q, qd)
        # pull back the energized task-space system
        after = pullback(energize(g, E), tm, q, qd)
        # energize the pulled-back generator with the pulled-back energy
        geom = pullback(term.geometry_spec(), tm, q, qd)
        M, f_e = E_root.mass(q, qd), E_root.force(q, qd)
        # the root metric has rank 2, so compare forces rather than accelerations
        P_f = f_e + (geom.f - f_e) - (M @ qd) * float(qd @ (geom.f - f_e)) / float(qd @ M @ qd)
        assert after.M == pytest.approx(M, rel=1e-6, abs=1e-9)
        assert after.f == pytest.approx(P_f, rel=1e-6, abs=1e-9)


def test_unbiased_along_convergent_rollout():
    """Root generator magnitude shrinks at least quadratically with speed."""
    fabric = reach_fabric(limits=False)
    psi = soft_distance_field([2.0, 1.2], 2.0, 10.0).pullback(ee_taskmap(default_arm()))
    traj = rollout(damped_accel(fabric, psi, 2.0), (0.0, READY_Q, np.zeros(3)), 1e-2, 15.0)
    gen = fabric.generator()
    rng = np.random.default_rng(0)
    unit = [gen(q, d / np.linalg.norm(d)) for q in traj.q[::50] for d in [rng.normal(size=3) for _ in range(20)]]
    C = 2.0 * max(np.linalg.norm(h) for h in unit)
    for q, qd in zip(traj.q, traj.qd):
        s = np.linalg.norm(qd)
        if s > 0:
            assert np.linalg.norm(gen(q, qd)) <= C * s ** 2
    assert np.linalg.norm(traj.qd[-1]) < 1e-3
