"""
Lifting over a floor and placing from above
===========================================

Two extra terms shape the path to goals that sit just above a floor. A lift
term pushes the hand upward while it is horizontally far from the goal, and an
approach term makes the final motion come down vertically. Neither term
touches where the arm ends up; they only bend the way it gets there.
"""
import sys
from pathlib import Path

import numpy as np

from optfabrics.arm import ee_jacobian
from optfabrics.plotting import emit_plot_data
from optfabrics.runner import run_episodes
from optfabrics.scenario import load_scenario, shipped_scenario_path

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out/shaping")
out.mkdir(parents=True, exist_ok=True)

s = load_scenario(shipped_scenario_path("shaping"))
lift = next(t.params for t in s.terms if t.kind == "lift")
print(f"floor at y={lift.floor_height}, clearance {lift.clearance}")

# %%
# For each episode: the lowest hand height while in transit (horizontally more
# than two clearances from the goal, after first lifting off) and the hand
# direction on arrival.
for k, (goal, traj, rep) in enumerate(run_episodes(s)):
    ee = np.column_stack([traj.channel("ee_x"), traj.channel("ee_y")])
    height = ee[:, 1] - lift.floor_height
    lifted = np.flatnonzero(height >= 0.5 * lift.clearance)
    transit = np.abs(ee[:, 0] - goal[0]) > 2 * lift.clearance
    transit[: lifted[0] if lifted.size else len(height)] = False
    lowest = height[transit].min() if transit.any() else float("nan")
    i = np.flatnonzero(np.linalg.norm(ee - np.asarray(goal), axis=1) < 0.5 * lift.clearance)[0]
    vel = ee_jacobian(s.arm, traj.q[i]) @ traj.qd[i]
    vel /= np.linalg.norm(vel)
    print(f"episode {k}: goal {goal}, lowest transit height {lowest:.3f}, "
          f"arrival direction ({vel[0]:+.2f}, {vel[1]:+.2f}), converged {rep['converged']}")
    emit_plot_data(traj, s.arm, out / f"episode_{k}.svg", goal=goal, floor_y=lift.floor_height)
print(f"snapshots in {out}")
