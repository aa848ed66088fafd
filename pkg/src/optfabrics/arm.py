"""Planar N-link arm kinematics.

Joint angles are relative and counterclockwise positive; link ``i`` points
along the absolute angle ``theta_i = base_angle + q_0 + ... + q_i``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spec import DimensionError, TaskMap, _vec, fd_curvature, fd_jacobian

#: step ladder used by :func:`jacobian_fd_check`
FD_STEPS = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6)


@dataclass(frozen=True)
class ArmModel:
    link_lengths: tuple
    joint_lower: tuple
    joint_upper: tuple
    base_xy: tuple = (0.0, 0.0)
    base_angle: float = 0.0

    def __post_init__(self):
        n = len(self.link_lengths)
        if n == 0:
            raise ValueError("arm needs at least one link")
        if any(not np.isfinite(l) or l <= 0 for l in self.link_lengths):
            raise ValueError("link lengths must be positive")
        if len(self.joint_lower) != n or len(self.joint_upper) != n:
            raise ValueError("one lower and one upper limit per joint")
        if any(lo >= hi for lo, hi in zip(self.joint_lower, self.joint_upper)):
            raise ValueError("joint_lower must be below joint_upper for every joint")
        if len(self.base_xy) != 2:
            raise ValueError("base_xy must be a planar position")
        # cached arrays for the hot path
        object.__setattr__(self, "_lengths", np.asarray(self.link_lengths, dtype=float))
        object.__setattr__(self, "_base", np.asarray(self.base_xy, dtype=float))

    @property
    def n_joints(self) -> int:
        return len(self.link_lengths)

    @property
    def reach(self) -> float:
        return float(sum(self.link_lengths))

    def angles(self, q) -> np.ndarray:
        return self.base_angle + np.cumsum(q)


def default_arm(n: int = 3) -> ArmModel:
    """Unit links with limits at +-pi and the base at the origin."""
    return ArmModel((1.0,) * n, (-np.pi,) * n, (np.pi,) * n)


def fk(arm: ArmModel, q) -> np.ndarray:
    """Base, joint and end-effector positions as an ``(n + 1, 2)`` array."""
    q = _vec(q, arm.n_joints, "q")
    th = arm.angles(q)
    steps = arm._lengths[:, None] * np.column_stack([np.cos(th), np.sin(th)])
    return np.vstack([arm._base, arm._base + np.cumsum(steps, axis=0)])


def ee_position(arm: ArmModel, q) -> np.ndarray:
    return fk(arm, q)[-1]


def ee_jacobian(arm: ArmModel, q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    th = arm.angles(q)
    l = arm._lengths
    # column k collects every link at or beyond joint k
    jx = -np.cumsum((l * np.sin(th))[::-1])[::-1]
    jy = np.cumsum((l * np.cos(th))[::-1])[::-1]
    return np.vstack([jx, jy])


def ee_curvature(arm: ArmModel, q, qd) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    th = arm.angles(q)
    w2 = np.cumsum(qd) ** 2 * arm._lengths
    return -np.array([w2 @ np.cos(th), w2 @ np.sin(th)])


def _ee_all(arm: ArmModel, q, qd):
    th = arm.angles(q)
    lc = arm._lengths * np.cos(th)
    ls = arm._lengths * np.sin(th)
    x = arm._base + np.array([lc.sum(), ls.sum()])
    J = np.vstack([-np.cumsum(ls[::-1])[::-1], np.cumsum(lc[::-1])[::-1]])
    w2 = np.cumsum(qd) ** 2
    return x, J, -np.array([w2 @ lc, w2 @ ls])


def ee_taskmap(arm: ArmModel) -> TaskMap:
    """End-effector position map with analytic Jacobian and curvature."""
    return TaskMap(
        arm.n_joints, 2,
        lambda q: ee_position(arm, q),
        lambda q: ee_jacobian(arm, q),
        lambda q, qd: ee_curvature(arm, q, qd),
        "ee",
        lambda q, qd: _ee_all(arm, q, qd),
    )


def limit_taskmap(arm: ArmModel, joint: int, side: str) -> TaskMap:
    """Distance to one joint limit: ``q_i - lower_i`` or ``upper_i - q_i``."""
    n = arm.n_joints
    if not 0 <= joint < n:
        raise DimensionError(f"joint index {joint} out of range for a {n}-joint arm")
    row = np.zeros((1, n))
    if side == "lower":
        row[0, joint] = 1.0
        lim = float(arm.joint_lower[joint])
        fn = lambda q: np.array([q[joint] - lim])  # noqa: E731
    elif side == "upper":
        row[0, joint] = -1.0
        lim = float(arm.joint_upper[joint])
        fn = lambda q: np.array([lim - q[joint]])  # noqa: E731
    else:
        raise ValueError(f"side must be 'lower' or 'upper', got {side!r}")
    zero = np.zeros(1)
    return TaskMap(n, 1, fn, lambda q: row, lambda q, qd: zero, f"{side}{joint}",
                   lambda q, qd: (fn(q), row, zero))


def joint_taskmaps(arm: ArmModel) -> list[TaskMap]:
    """The 2N limit-distance maps, lower then upper for each joint."""
    return [limit_taskmap(arm, i, side) for i in range(arm.n_joints) for side in ("lower", "upper")]


def limit_distances(arm: ArmModel, q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return np.concatenate([q - np.asarray(arm.joint_lower), np.asarray(arm.joint_upper) - q])


def _unit_rel(a, b) -> float:
    return float(np.max(np.abs(a - b))) / max(1.0, float(np.max(np.abs(b))))


def jacobian_fd_check(tm: TaskMap, q, qd) -> float:
    """Largest disagreement of ``J`` and ``Jdot qd`` with central differences.

    Errors are relative with a unit floor. Each quantity is compared against
    a ladder of step sizes and the best agreement is kept, so that exact
    (affine) maps are not charged for round-off at tiny steps.
    """
    q = _vec(q, tm.domain_dim, "q")
    qd = _vec(qd, tm.domain_dim, "qd")
    J = tm.jacobian(q)
    c = tm.curvature(q, qd)
    j_err = min(_unit_rel(J, fd_jacobian(tm.map_fn, q, tm.codomain_dim, h)) for h in FD_STEPS)
    c_err = min(_unit_rel(c, fd_curvature(tm.jacobian, q, qd, h)) for h in FD_STEPS)
    return max(j_err, c_err)
