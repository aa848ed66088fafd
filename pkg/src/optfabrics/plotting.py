"""Static plot artifacts: SVG arm-pose snapshots and an end-effector CSV."""
from __future__ import annotations

import csv
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .arm import ArmModel, fk

EE_COLUMNS = ["t", "ee_x", "ee_y", "H_fabric", "H_exec", "psi", "grad_norm"]


def snapshot_indices(n_rows: int, count: int = 12) -> list[int]:
    """``count`` row indices evenly spaced in time, always including the last row."""
    if n_rows < 1:
        raise ValueError("trajectory is empty")
    if count < 1:
        raise ValueError("snapshot count must be at least 1")
    return sorted(set(np.linspace(0, n_rows - 1, min(count, n_rows)).round().astype(int).tolist()))


def _as_columns(traj) -> dict:
    """Accept a loaded CSV dict or a :class:`~optfabrics.simulate.Trajectory`."""
    if isinstance(traj, dict):
        return traj
    cols = {"t": traj.t}
    cols.update(traj.channels)
    for i in range(traj.q.shape[1]):
        cols[f"q{i}"] = traj.q[:, i]
    return cols


def render_svg(poses: list[np.ndarray], ee_path: np.ndarray, goal=None, floor_y=None,
               size: int = 480, title: str = "") -> str:
    pts = np.vstack(poses + [ee_path])
    if goal is not None:
        pts = np.vstack([pts, np.asarray(goal)[None, :]])
    lo = pts.min(axis=0) - 0.3
    hi = pts.max(axis=0) + 0.3
    scale = size / float(max(hi - lo))

    def xy(p):
        return f"{(p[0] - lo[0]) * scale:.2f},{(hi[1] - p[1]) * scale:.2f}"

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
           f'viewBox="0 0 {size} {size}">']
    if title:
        out.append(f"<title>{escape(title)}</title>")
    out.append(f'<rect width="{size}" height="{size}" fill="white"/>')
    if floor_y is not None:
        y = (hi[1] - floor_y) * scale
        out.append(f'<line x1="0" y1="{y:.2f}" x2="{size}" y2="{y:.2f}" stroke="#996633" stroke-width="2"/>')
    out.append(f'<polyline points="{" ".join(xy(p) for p in ee_path)}" fill="none" '
               f'stroke="#cc3333" stroke-width="1" stroke-dasharray="4,3"/>')
    n = len(poses)
    for i, pose in enumerate(poses):
        # light for early snapshots, dark for late ones
        opacity = 0.15 + 0.85 * (i / (n - 1) if n > 1 else 1.0)
        out.append(f'<polyline points="{" ".join(xy(p) for p in pose)}" fill="none" stroke="#1f3b73" '
                   f'stroke-width="3" stroke-linejoin="round" stroke-opacity="{opacity:.3f}"/>')
    if goal is not None:
        gx, gy = xy(goal).split(",")
        out.append(f'<circle cx="{gx}" cy="{gy}" r="5" fill="#2a9d2a"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_plot_data(traj, arm: ArmModel, path, snapshots: int = 12, goal=None, floor_y=None):
    """Write ``path`` (SVG) and a sibling ``<stem>_ee.csv`` with the end-effector path.

    Returns the two written paths.
    """
    cols = _as_columns(traj)
    n = len(cols["t"])
    idx = snapshot_indices(n, snapshots)
    q = np.column_stack([cols[f"q{i}"] for i in range(arm.n_joints)])
    poses = [fk(arm, q[i]) for i in idx]
    if "ee_x" not in cols:
        ee = np.array([fk(arm, qi)[-1] for qi in q])
        cols = {**cols, "ee_x": ee[:, 0], "ee_y": ee[:, 1]}
    ee = np.column_stack([cols["ee_x"], cols["ee_y"]])
    path = Path(path)
    path.write_text(render_svg(poses, ee, goal, floor_y, title=path.stem))
    csv_path = path.with_name(path.stem + "_ee.csv")
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EE_COLUMNS)
        for i in range(n):
            w.writerow([repr(float(cols[c][i])) if c in cols else "nan" for c in EE_COLUMNS])
    return path, csv_path
