from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from optfabrics.arm import (ArmModel, default_arm, ee_curvature, ee_jacobian, ee_position, ee_taskmap, fk,
                            jacobian_fd_check, joint_taskmaps, limit_distances, limit_taskmap)
from optfabrics.spec import DimensionError, Spec, fd_jacobian, pullback, sum_specs

angles = st.lists(st.floats(-np.pi, np.pi), min_size=3, max_size=3).map(np.array)


@pytest.mark.parametrize("q,ee", [((0.0, 0.0), (2.0, 0.0)), ((np.pi / 2, 0.0), (0.0, 2.0)),
                                  ((0.0, np.pi / 2), (1.0, 1.0)), ((np.pi, 0.0), (-2.0, 0.0))])
def test_two_link_poses(arm2, q, ee):
    assert ee_position(arm2, q) == pytest.approx(ee, abs=1e-12)


def test_base_pose_moves_chain():
    arm = ArmModel((1.0, 0.5), (-3, -3), (3, 3), base_xy=(1.0, -1.0), base_angle=np.pi / 2)
    pts = fk(arm, [0.0, 0.0])
    assert pts[0] == pytest.approx([1.0, -1.0])
    assert pts[-1] == pytest.approx([1.0, 0.5])


@settings(max_examples=100, deadline=None)
@given(angles)
def test_reach_bound_and_chain_lengths(q):
    arm = ArmModel((1.0, 0.7, 0.4), (-4,) * 3, (4,) * 3)
    pts = fk(arm, q)
    assert np.linalg.norm(pts[-1]) <= arm.reach + 1e-12
    assert np.linalg.norm(np.diff(pts, axis=0), axis=1) == pytest.approx(arm.link_lengths, abs=1e-12)


def test_fk_dimension_mismatch(arm3):
    with pytest.raises(DimensionError):
        fk(arm3, [0.0, 0.0])


def test_jacobian_at_zero(arm2):
    J = ee_jacobian(arm2, [0.0, 0.0])
    assert J == pytest.approx(np.array([[0.0, 0.0], [2.0, 1.0]]), abs=1e-15)
    assert J == pytest.approx(fd_jacobian(lambda q: ee_position(arm2, q), np.zeros(2)), abs=1e-8)


def test_curvature_zero_at_rest(arm3, rng):
    assert np.array_equal(ee_curvature(arm3, rng.normal(size=3), np.zeros(3)), np.zeros(2))


def test_curvature_scales_quadratically(arm3, rng):
    q, qd = rng.normal(size=3), rng.normal(size=3)
    assert ee_curvature(arm3, q, 2 * qd) == pytest.approx(4 * ee_curvature(arm3, q, qd), rel=1e-14)


def test_fused_evaluation_matches_separate(arm3, rng):
    tm = ee_taskmap(arm3)
    q, qd = rng.normal(size=3), rng.normal(size=3)
    x, J, c = tm.evaluate_fn(q, qd)
    assert x == pytest.approx(ee_position(arm3, q), abs=1e-14)
    assert J == pytest.approx(ee_jacobian(arm3, q), abs=1e-14)
    assert c == pytest.approx(ee_curvature(arm3, q, qd), abs=1e-14)


def test_ee_map_passes_fd_check(arm3):
    rng = np.random.default_rng(11)
    tm = ee_taskmap(arm3)
    worst = max(jacobian_fd_check(tm, rng.uniform(-np.pi, np.pi, 3), rng.normal(size=3)) for _ in range(1000))
    assert worst < 1e-6


def test_limit_maps(arm3, rng):
    maps = joint_taskmaps(arm3)
    assert [tm.label for tm in maps] == ["lower0", "upper0", "lower1", "upper1", "lower2", "upper2"]
    q = np.zeros(3)
    assert all(tm(q)[0] > 0 for tm in maps)
    assert limit_taskmap(arm3, 1, "upper").jacobian(q) == pytest.approx(np.array([[0.0, -1.0, 0.0]]))
    for tm in maps:
        assert jacobian_fd_check(tm, rng.uniform(-3, 3, 3), rng.normal(size=3)) < 1e-12
    assert limit_distances(arm3, q) == pytest.approx(np.full(6, np.pi))


def test_limit_map_errors(arm3):
    with pytest.raises(DimensionError):
        limit_taskmap(arm3, 3, "lower")
    with pytest.raises(ValueError):
        limit_taskmap(arm3, 0, "side")


def test_limit_barrier_pullback_matches_joint_space(arm3, rng):
    """Summing a 1-D barrier over the limit maps equals writing it in joint space directly."""
    barrier = Spec(1, lambda x, v: np.array([[1.0 / x[0]]]), lambda x, v: np.array([v[0] ** 2 / x[0] ** 2]))
    q, qd = rng.uniform(-2, 2, 3), rng.normal(size=3)
    got = sum_specs([pullback(barrier, tm, q, qd) for tm in joint_taskmaps(arm3)])
    lo, hi = q + np.pi, np.pi - q
    M = np.diag(1 / lo + 1 / hi)
    f = qd ** 2 / lo ** 2 - qd ** 2 / hi ** 2
    assert got.M == pytest.approx(M)
    assert got.f == pytest.approx(f)


def test_corrupted_jacobian_flagged(arm3, rng):
    tm = ee_taskmap(arm3)
    broken = replace(tm, jacobian_fn=lambda q: tm.jacobian_fn(q) + 0.1, evaluate_fn=None)
    assert jacobian_fd_check(broken, rng.normal(size=3), rng.normal(size=3)) > 1e-2


@pytest.mark.parametrize("kw", [{"link_lengths": (1.0, -1.0)}, {"link_lengths": ()},
                                {"joint_lower": (1.0, 0.0)}, {"joint_upper": (1.0,)}])
def test_arm_validation(kw):
    base = dict(link_lengths=(1.0, 1.0), joint_lower=(-1.0, -1.0), joint_upper=(1.0, 1.0))
    with pytest.raises(ValueError):
        ArmModel(**{**base, **kw})


def test_default_arm():
    arm = default_arm()
    assert arm.n_joints == 3
    assert arm.reach == 3.0
    assert arm.joint_upper == (np.pi,) * 3
