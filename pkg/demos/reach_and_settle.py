"""
Reaching five goals in a row
============================

A three-link arm visits five goals, each episode starting where the last one
stopped. Joint limits, a pull toward a comfortable posture and the attractor
all share the same fabric, and speed control bleeds off energy until the arm
comes to rest.

Run with ``python demos/reach_and_settle.py [out_dir]``.
"""
import sys
from pathlib import Path

import numpy as np

from optfabrics.arm import ee_position
from optfabrics.plotting import emit_plot_data
from optfabrics.runner import run_episodes
from optfabrics.scenario import load_scenario, shipped_scenario_path

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out/reach")
out.mkdir(parents=True, exist_ok=True)

s = load_scenario(shipped_scenario_path("reach"))
print(f"arm links {s.arm.link_lengths}, {len(s.goals)} goals, dt {s.dt}")

# %%
# Each episode reports when it settled and how far the hand ended from the goal.
runs = run_episodes(s)
for k, (goal, traj, rep) in enumerate(runs):
    hand = ee_position(s.arm, traj.q[-1])
    print(f"episode {k}: goal {goal} settled at t={rep['settle_time']:.2f} s, "
          f"hand {np.round(hand, 4)}, kkt {rep['kkt_residual']:.1e}, "
          f"closest joint limit {rep['min_limit_distance']:.3f} rad")

# %%
# The fabric energy is not conserved here because damping is on; it should
# fall toward zero as each episode ends.
for k, (goal, traj, _) in enumerate(runs):
    H = traj.channel("H_fabric")
    print(f"episode {k}: fabric energy peak {np.nanmax(H):.3f}, final {H[-1]:.2e}")
    svg, _ = emit_plot_data(traj, s.arm, out / f"episode_{k}.svg", goal=goal)
    print(f"  drawn to {svg}")
