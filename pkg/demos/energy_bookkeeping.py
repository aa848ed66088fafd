"""
Where the energy goes
=====================

Without damping or a potential, a fabric is a conservative system: its
energy is a constant of motion and changing the initial speed only changes
how fast the same path is traced. With damping on, energy drains at exactly
the rate the damping removes it. This script shows all three numerically.
"""
import numpy as np

from optfabrics.arm import default_arm, ee_taskmap
from optfabrics.checks import GOAL, READY_Q, conservation_drift, damped_energy_residual, path_deviation, reach_fabric
from optfabrics.terms import soft_distance_field

fabric = reach_fabric(limits=False)
qd0 = np.array([0.6, -0.4, 0.8])

# %%
# Energy drift of a 4 s free rollout, relative to the starting energy.
print(f"relative energy drift: {conservation_drift(fabric, READY_Q, qd0, 4.0, 1e-3):.2e}")

# %%
# Paths traced from the same start at half, full and double speed, compared
# after resampling by arc length.
print(f"largest path deviation across speeds: {path_deviation(fabric, READY_Q, qd0):.2e}")

# %%
# With a potential and constant damping, the total energy falls at the rate
# the damping takes out; the residual compares the two.
psi = soft_distance_field(GOAL, 2.0, 10.0).pullback(ee_taskmap(default_arm()))
print(f"damped energy residual: {damped_energy_residual(fabric, psi, 0.5, READY_Q, qd0):.2e}")
