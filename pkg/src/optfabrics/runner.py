"""Scenario execution: one rollout per goal, chained through final states."""
from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .arm import ArmModel, ee_position, ee_taskmap, joint_taskmaps, limit_taskmap
from .fabric import GeometricFabric
from .scenario import Scenario
from .simulate import Trajectory, convergence_report, rollout, settled
from .speed import SpeedControlConfig, SpeedController
from .spec import Potential, identity_map
from .terms import (attractor_term, approach_term, base_metric_term, default_config_term,
                    joint_limit_term, lift_term, soft_distance_field)

BASE_COLUMNS = ["t", "ee_x", "ee_y", "H_fabric", "H_exec", "psi", "grad_norm"]
#: the runner integrates past the convergence threshold until the arm is this still
STOP_SPEED = 1e-6

DIAG_COLUMNS = ["alpha_ex0", "alpha_ex_psi", "alpha_le", "beta_reg", "alpha_boost", "alpha_reg"]


def csv_columns(n_joints: int) -> list[str]:
    return (BASE_COLUMNS + [f"q{i}" for i in range(n_joints)] + [f"qd{i}" for i in range(n_joints)]
            + DIAG_COLUMNS)


@dataclass
class EpisodeSetup:
    fabric: GeometricFabric
    psi: Potential
    limit_maps: list
    controller: SpeedController


def build_fabric(s: Scenario, goal) -> tuple[GeometricFabric, list]:
    """The scenario's fabric for one goal, plus the joint-limit maps."""
    arm = s.arm
    n = arm.n_joints
    ee = ee_taskmap(arm)
    root = identity_map(n)
    leaves = []
    limits = joint_taskmaps(arm)
    for spec in s.terms:
        if not spec.enabled:
            continue
        p = spec.params
        if spec.kind == "attractor":
            leaves.append((ee, attractor_term(goal, p)[0]))
        elif spec.kind == "approach":
            leaves.append((ee, approach_term(goal, p)))
        elif spec.kind == "lift":
            leaves.append((ee, lift_term(p.floor_height, p)))
        elif spec.kind == "joint_limit":
            for i in range(n):
                leaves.append((limit_taskmap(arm, i, "lower"), joint_limit_term(arm.joint_lower[i], "lower", p)))
                leaves.append((limit_taskmap(arm, i, "upper"), joint_limit_term(arm.joint_upper[i], "upper", p)))
        elif spec.kind == "default_config":
            leaves.append((root, default_config_term(p.q0, p)))
        elif spec.kind == "base_metric":
            leaves.append((root, base_metric_term(n, p)))
        else:  # pragma: no cover - scenario validation rejects unknown kinds
            raise ValueError(spec.kind)
    return GeometricFabric(n, leaves), limits


def root_potential(s: Scenario, goal) -> Potential:
    ee_psi = soft_distance_field(goal, s.potential["k"], s.potential["alpha_psi"], "goal")
    return ee_psi.pullback(ee_taskmap(s.arm))


def speed_config(s: Scenario, **overrides) -> SpeedControlConfig:
    return SpeedControlConfig(**{**s.speed_control, **overrides})


def setup_episode(s: Scenario, goal, **speed_overrides) -> EpisodeSetup:
    fabric, limits = build_fabric(s, goal)
    psi = root_potential(s, goal)
    ctrl = SpeedController(fabric, psi, speed_config(s, **speed_overrides))
    return EpisodeSetup(fabric, psi, limits, ctrl)


def recorder(arm: ArmModel, fabric: GeometricFabric, psi: Potential, exec_energy):
    """Per-row channels: end-effector position, both energies and the potential."""

    def record(t, q, qd):
        ee = ee_position(arm, q)
        return {
            "ee_x": ee[0],
            "ee_y": ee[1],
            "H_fabric": fabric.hamiltonian(q, qd),
            "H_exec": exec_energy.momentum(q, qd) @ qd - exec_energy.value(q, qd),
            "psi": psi.value(q),
            "grad_norm": float(np.linalg.norm(psi.gradient(q))),
        }

    return record


def run_episode(s: Scenario, goal, q_init, **speed_overrides):
    """Roll out one goal from rest at ``q_init``; returns ``(trajectory, report)``."""
    ep = setup_episode(s, goal, **speed_overrides)
    state0 = (0.0, np.asarray(q_init, dtype=float), np.zeros(s.arm.n_joints))
    traj = rollout(ep.controller, state0, s.dt, s.t_max, stop=settled(STOP_SPEED),
                   record=recorder(s.arm, ep.fabric, ep.psi, ep.controller.cfg.execution_energy))
    report = convergence_report(traj, ep.psi, ep.limit_maps)
    report["ee_error"] = float(np.linalg.norm(ee_position(s.arm, traj.q[-1]) - np.asarray(goal)))
    report["error"] = traj.error
    return traj, report


def run_episodes(s: Scenario, **speed_overrides):
    """All goals in order, each starting from the previous final configuration."""
    q = np.asarray(s.initial_q, dtype=float)
    out = []
    for goal in s.goals:
        traj, report = run_episode(s, goal, q, **speed_overrides)
        out.append((goal, traj, report))
        q = traj.q[-1]
    return out


def _fmt(x) -> str:
    return repr(float(x))


def write_trajectory_csv(traj: Trajectory, n_joints: int, path) -> None:
    cols = csv_columns(n_joints)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for i in range(len(traj)):
            row = [traj.t[i]]
            row += [traj.channels[c][i] for c in BASE_COLUMNS[1:]]
            row += list(traj.q[i]) + list(traj.qd[i])
            row += [traj.channels[c][i] for c in DIAG_COLUMNS]
            w.writerow([_fmt(v) for v in row])


def load_trajectory_csv(path) -> dict:
    """Read a trajectory CSV back into ``{column: array}`` (column order kept)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in r] for r in reader]
    data = np.asarray(rows, dtype=float).reshape(len(rows), len(header))
    return {name: data[:, j] for j, name in enumerate(header)}


def run_scenario(s: Scenario, out_dir, **speed_overrides) -> dict:
    """Run every episode and write ``episode_<i>.csv`` plus ``summary.json``.

    Returns ``{"files": [...], "summary": {...}, "ok": bool}``; ``ok`` is
    false when any episode failed or did not converge.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    episodes = []
    ok = True
    start = time.perf_counter()
    for i, (goal, traj, report) in enumerate(run_episodes(s, **speed_overrides)):
        path = out / f"episode_{i}.csv"
        if len(traj):
            write_trajectory_csv(traj, s.arm.n_joints, path)
            files.append(str(path))
        ok = ok and report["converged"] and report["error"] is None
        episodes.append({
            "goal": list(goal),
            "converged": report["converged"],
            "settle_time": report["settle_time"],
            "kkt_residual": report["kkt_residual"],
            "min_limit_distance": report["min_limit_distance"],
            "final_q": traj.q[-1].tolist() if len(traj) else list(s.initial_q),
            "ee_error": report["ee_error"] if len(traj) else None,
            "error": report["error"],
        })
    summary = {"scenario": s.name, "dt": s.dt, "t_max": s.t_max, "seed": s.seed, "episodes": episodes}
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    files.append(str(out / "summary.json"))
    return {"files": files, "summary": summary, "ok": ok, "elapsed": time.perf_counter() - start}
