"""Optimization fabrics for second-order motion generation.

The package is layered: :mod:`.spec` (spec algebra and task maps),
:mod:`.energy` (energy Lagrangians), :mod:`.energization`, :mod:`.terms`
(behavior terms), :mod:`.fabric`, :mod:`.speed` (speed control),
:mod:`.simulate` (RK4 rollouts), :mod:`.arm` (planar kinematics) and the
scenario runner with its command line front end.
"""
from .arm import ArmModel, default_arm, ee_taskmap, fk, jacobian_fd_check, joint_taskmaps
from .energization import (GeometryGenerator, bent_generator, check_hd2, energization_coefficient,
                           energize, projector)
from .energy import (EnergyLagrangian, conformal_energy, el_terms, energy_rate, euclidean_energy,
                     finite_diff_check, hamiltonian, riemannian_energy, validate_finsler)
from .fabric import GeometricFabric
from .simulate import Trajectory, convergence_report, rollout, settled, step_rk4
from .spec import (FabricError, Potential, SingularMetricError, Spec, TaskMap, TransformTree, damp_spec,
                   evaluate_policy, force_spec, pullback, sum_specs, tree_resolve)
from .speed import (SpeedControlConfig, SpeedController, boost_coefficient, controlled_acceleration,
                    damping_coefficient, execution_alphas)
from .terms import (FabricTerm, TermParams, attractor_term, behavior_shaping_terms, default_config_term,
                    joint_limit_term, soft_distance_potential)

__version__ = "0.1.0"

__all__ = [
    "ArmModel",
    "default_arm",
    "ee_taskmap",
    "fk",
    "jacobian_fd_check",
    "joint_taskmaps",
    "GeometryGenerator",
    "bent_generator",
    "check_hd2",
    "energization_coefficient",
    "energize",
    "projector",
    "EnergyLagrangian",
    "conformal_energy",
    "el_terms",
    "energy_rate",
    "euclidean_energy",
    "finite_diff_check",
    "hamiltonian",
    "riemannian_energy",
    "validate_finsler",
    "GeometricFabric",
    "Trajectory",
    "convergence_report",
    "rollout",
    "settled",
    "step_rk4",
    "FabricError",
    "Potential",
    "SingularMetricError",
    "Spec",
    "TaskMap",
    "TransformTree",
    "damp_spec",
    "evaluate_policy",
    "force_spec",
    "pullback",
    "sum_specs",
    "tree_resolve",
    "SpeedControlConfig",
    "SpeedController",
    "boost_coefficient",
    "controlled_acceleration",
    "damping_coefficient",
    "execution_alphas",
    "FabricTerm",
    "TermParams",
    "attractor_term",
    "behavior_shaping_terms",
    "default_config_term",
    "joint_limit_term",
    "soft_distance_potential",
]
