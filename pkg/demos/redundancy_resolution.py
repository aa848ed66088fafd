"""
Using the spare joint
=====================

Three joints reaching a point in the plane leave one degree of freedom free.
The default-configuration term spends it on staying near a preferred posture.
Here the same five goals are run with the term on and off, and the final
postures are compared against that preferred posture.
"""
import sys
from pathlib import Path

import numpy as np

from optfabrics.plotting import emit_plot_data
from optfabrics.runner import run_episodes
from optfabrics.scenario import load_scenario, shipped_scenario_path

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out/redundancy")
out.mkdir(parents=True, exist_ok=True)

with_term = load_scenario(shipped_scenario_path("reach"))
without_term = load_scenario(shipped_scenario_path("redundancy"))
q0 = np.asarray(next(t.params.q0 for t in with_term.terms if t.kind == "default_config"))

runs = {"with": run_episodes(with_term), "without": run_episodes(without_term)}

# %%
# Both runs reach every goal; only the posture differs.
wins = 0
for k, (a, b) in enumerate(zip(runs["with"], runs["without"])):
    d_with = np.linalg.norm(a[1].q[-1] - q0)
    d_without = np.linalg.norm(b[1].q[-1] - q0)
    wins += d_with < d_without
    print(f"goal {a[0]}: |q - q0| {d_with:.3f} with the term, {d_without:.3f} without "
          f"(hand errors {a[2]['ee_error']:.1e} / {b[2]['ee_error']:.1e})")
print(f"closer to the preferred posture in {wins} of {len(with_term.goals)} episodes")

for label, rs in runs.items():
    for k, (goal, traj, _) in enumerate(rs):
        emit_plot_data(traj, with_term.arm, out / f"{label}_{k}.svg", goal=goal)
print(f"snapshots in {out}")
