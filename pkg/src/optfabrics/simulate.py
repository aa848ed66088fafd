"""Fixed-step RK4 rollouts of second-order systems ``qdd = a(t, q, qd)``."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .spec import FabricError, Potential, TaskMap

SPEED_TOL = 1e-4
HOLD_TIME = 0.5
ACTIVE_LIMIT = 1e-3


class NonFiniteStateError(FabricError, FloatingPointError):
    pass


def _call(accel_fn, t, q, qd):
    out = accel_fn(t, q, qd)
    if isinstance(out, tuple):
        qdd, diag = out
    else:
        qdd, diag = out, None
    qdd = np.asarray(qdd, dtype=float)
    if not np.all(np.isfinite(qdd)):
        raise NonFiniteStateError(f"non-finite acceleration at t={t:.6g}")
    return qdd, diag


def _rk4(accel_fn, t, q, qd, dt, k1):
    h = 0.5 * dt
    a1 = k1
    q2, v2 = q + h * qd, qd + h * a1
    a2 = _call(accel_fn, t + h, q2, v2)[0]
    q3, v3 = q + h * v2, qd + h * a2
    a3 = _call(accel_fn, t + h, q3, v3)[0]
    q4, v4 = q + dt * v3, qd + dt * a3
    a4 = _call(accel_fn, t + dt, q4, v4)[0]
    q_next = q + dt / 6.0 * (qd + 2 * v2 + 2 * v3 + v4)
    qd_next = qd + dt / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4)
    if not (np.all(np.isfinite(q_next)) and np.all(np.isfinite(qd_next))):
        raise NonFiniteStateError(f"non-finite state after step from t={t:.6g}")
    return q_next, qd_next


def step_rk4(accel_fn, state, dt: float):
    """One classical Runge-Kutta step of the first-order lift ``(q, qd)``.

    Parameters
    ----------
    accel_fn : callable
        ``accel_fn(t, q, qd)`` returning ``qdd`` or ``(qdd, diagnostics)``.
    state : tuple
        ``(t, q, qd)``.
    dt : float
        Positive step size.

    Returns
    -------
    tuple
        The next ``(t, q, qd)``.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    t, q, qd = state
    q = np.asarray(q, dtype=float)
    qd = np.asarray(qd, dtype=float)
    k1 = _call(accel_fn, t, q, qd)[0]
    q_next, qd_next = _rk4(accel_fn, t, q, qd, dt, k1)
    return t + dt, q_next, qd_next


@dataclass
class Trajectory:
    """Uniformly sampled rollout with named scalar channels.

    ``channels`` holds per-row scalars such as ``H_fabric`` or the speed
    controller's coefficients. ``error`` is set when the rollout stopped on
    a failed step; rows up to that point are kept.
    """

    dt: float
    t: np.ndarray
    q: np.ndarray
    qd: np.ndarray
    qdd: np.ndarray
    channels: dict = field(default_factory=dict)
    error: str | None = None

    def __len__(self) -> int:
        return self.t.shape[0]

    @property
    def speed(self) -> np.ndarray:
        return np.linalg.norm(self.qd, axis=1)

    def channel(self, name: str) -> np.ndarray:
        return self.channels[name]

    @property
    def final_state(self):
        return float(self.t[-1]), self.q[-1].copy(), self.qd[-1].copy()


def settled(speed_tol: float = SPEED_TOL, hold: float = HOLD_TIME):
    """Stop criterion: speed below ``speed_tol`` for ``hold`` seconds.

    The returned closure keeps the time the speed first dropped below the
    tolerance, so use a fresh one per rollout.
    """
    since = [None]

    def stop(t, q, qd) -> bool:
        if np.linalg.norm(qd) < speed_tol:
            if since[0] is None:
                since[0] = t
            return t - since[0] >= hold - 1e-9
        since[0] = None
        return False

    return stop


def rollout(accel_fn, state0, dt: float, t_max: float, stop: Callable | None = None,
            record: Callable | None = None) -> Trajectory:
    """Integrate from ``state0`` until ``t_max`` or until ``stop(t, q, qd)``.

    ``record(t, q, qd)`` may return a dict of extra scalar channels for each
    row; diagnostics returned by ``accel_fn`` are recorded as well. A failing
    step ends the rollout with the rows collected so far and ``error`` set.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if not t_max > 0:
        raise ValueError(f"t_max must be positive, got {t_max}")
    t0, q, qd = state0
    q = np.array(q, dtype=float)
    qd = np.array(qd, dtype=float)
    n_steps = int(np.ceil(t_max / dt - 1e-9))
    ts, qs, qds, qdds = [], [], [], []
    chans: dict[str, list] = {}
    error = None
    for i in range(n_steps + 1):
        t = t0 + i * dt
        try:
            qdd, diag = _call(accel_fn, t, q, qd)
            extra = record(t, q, qd) if record is not None else None
        except (FabricError, FloatingPointError, np.linalg.LinAlgError) as exc:
            error = f"t={t:.6g}: {exc}"
            break
        ts.append(t)
        qs.append(q)
        qds.append(qd)
        qdds.append(qdd)
        for src in (diag, extra):
            if src:
                for key, val in src.items():
                    chans.setdefault(key, []).append(float(val))
        if i == n_steps or (stop is not None and stop(t, q, qd)):
            break
        try:
            q, qd = _rk4(accel_fn, t, q, qd, dt, qdd)
        except (FabricError, FloatingPointError, np.linalg.LinAlgError) as exc:
            error = f"t={t:.6g}: {exc}"
            break
    n = len(ts)
    dim = q.shape[0]
    return Trajectory(
        dt,
        np.asarray(ts),
        np.asarray(qs).reshape(n, dim),
        np.asarray(qds).reshape(n, dim),
        np.asarray(qdds).reshape(n, dim),
        {k: np.asarray(v) for k, v in chans.items()},
        error,
    )


def arc_length(path: np.ndarray) -> np.ndarray:
    """Cumulative polyline length along the rows of ``path``, starting at 0."""
    seg = np.linalg.norm(np.diff(np.asarray(path, dtype=float), axis=0), axis=1)
    return np.concatenate([[0.0], np.cumsum(seg)])


def resample_by_arclength(path: np.ndarray, count: int, length: float | None = None) -> np.ndarray:
    """``count`` points spaced evenly in arc length over the first ``length`` of ``path``.

    Linear interpolation between rows; ``length`` defaults to the whole path
    and must not exceed it.
    """
    path = np.asarray(path, dtype=float)
    s = arc_length(path)
    total = s[-1] if length is None else float(length)
    if total > s[-1] * (1 + 1e-12):
        raise ValueError(f"path is only {s[-1]:.6g} long, cannot resample {total:.6g}")
    grid = np.linspace(0.0, total, count)
    return np.column_stack([np.interp(grid, s, path[:, j]) for j in range(path.shape[1])])


def path_length_stop(length: float):
    """Stop criterion: the configuration path has reached ``length``."""
    state = {"prev": None, "s": 0.0}

    def stop(t, q, qd) -> bool:
        if state["prev"] is not None:
            state["s"] += float(np.linalg.norm(q - state["prev"]))
        state["prev"] = np.array(q, dtype=float)
        return state["s"] >= length

    return stop


def limit_tangential(grad: np.ndarray, rows: Sequence[np.ndarray]) -> np.ndarray:
    """Component of ``grad`` orthogonal to every row in ``rows``."""
    if not rows:
        return grad
    A = np.atleast_2d(np.vstack(rows))
    coef, *_ = np.linalg.lstsq(A.T, grad, rcond=None)
    return grad - A.T @ coef


def convergence_report(traj: Trajectory, psi: Potential, limit_coords: Sequence[TaskMap] = (),
                       speed_tol: float = SPEED_TOL, hold: float = HOLD_TIME) -> dict:
    """Convergence flag, settle time, KKT residual and closest limit approach.

    Convergence means the speed stayed below ``speed_tol`` for at least
    ``hold`` seconds up to the final row. The KKT residual is the norm of
    the potential gradient at the final state, restricted to directions
    tangential to every limit coordinate closer than 1e-3.
    """
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    speed = traj.speed
    slow = speed < speed_tol
    settle_time = None
    converged = False
    if slow[-1]:
        start = len(slow) - 1
        while start > 0 and slow[start - 1]:
            start -= 1
        settle_time = float(traj.t[start])
        converged = bool(traj.t[-1] - traj.t[start] >= hold - 1e-9) and traj.error is None
    q_final = traj.q[-1]
    grad = psi.gradient(q_final)
    active = []
    min_dist = np.inf
    for tm in limit_coords:
        dists = np.array([tm(q)[0] for q in traj.q])
        min_dist = min(min_dist, float(dists.min()))
        if dists[-1] < ACTIVE_LIMIT:
            active.append(tm.jacobian(q_final)[0])
    kkt = float(np.linalg.norm(limit_tangential(grad, active)))
    return {
        "converged": converged,
        "settle_time": settle_time,
        "kkt_residual": kkt,
        "min_limit_distance": None if not np.isfinite(min_dist) else min_dist,
    }
