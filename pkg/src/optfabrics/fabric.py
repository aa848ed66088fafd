"""Geometric fabrics assembled from behavior terms on a star-shaped tree.

Every term contributes its generator (as a ``(M_e, M_e h2)`` spec) and its
energy ``(M_e, f_e)``. Both are pulled back to the root and summed; the sum
of generators is then energized with the sum of energies. Because the
energization projector commutes with pullback, this equals pulling back
terms energized in their own spaces.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .energization import GeometryGenerator, alpha_eval, energized_force_eval
from .energy import EnergyLagrangian, pulled_energy, sum_energies
from .spec import Potential, SingularMetricError, Spec, SpecEval, TransformTree, _vec, solve_metric, zero_potential
from .terms import FabricTerm


class FabricEval(NamedTuple):
    """Root quantities at one state.

    ``f_geom`` is the summed geometry force (so ``-M^-1 f_geom`` is the raw
    root generator policy), ``f_energy`` the summed energy force and
    ``f_energized`` the force of the energized root spec.
    """

    M: np.ndarray
    f_geom: np.ndarray
    f_energy: np.ndarray
    f_energized: np.ndarray
    H: float

    def policy(self) -> np.ndarray:
        """Raw generator policy ``-M^-1 f_geom``."""
        return -solve_metric(self.M, self.f_geom)

    def energized_policy(self) -> np.ndarray:
        return -solve_metric(self.M, self.f_energized)


@dataclass
class GeometricFabric:
    """Fabric terms attached to task maps out of a common root space."""

    root_dim: int
    leaves: list

    def __post_init__(self):
        self.tree = TransformTree(self.root_dim, list(self.leaves))
        for _, term in self.leaves:
            if not isinstance(term, FabricTerm):
                raise TypeError("fabric leaves must hold FabricTerm instances")

    def _leaf_states(self, q, qd):
        for tm, term in self.leaves:
            if tm.evaluate_fn is not None:
                x, J, c = tm.evaluate_fn(q, qd)
                yield term, x, J @ qd, J, c
            else:
                x, xd, J, c = tm.evaluate(q, qd)
                yield term, x, xd, J, c

    def evaluate(self, q, qd, hamiltonian: bool = True) -> FabricEval:
        """Root quantities at ``(q, qd)``; ``H`` is NaN when ``hamiltonian`` is false."""
        q = _vec(q, self.root_dim, "q")
        qd = _vec(qd, self.root_dim, "qd")
        Js, Ms, fgs, fes = [], [], [], []
        H = 0.0 if hamiltonian else np.nan
        for term, x, xd, J, c in self._leaf_states(q, qd):
            if term.energy.active_fn is not None and not term.energy.active_fn(x, xd):
                continue  # a gated-off term contributes nothing
            Mx, fg, fe = term.evaluate(x, xd)
            Mc = Mx @ c
            Js.append(J)
            Ms.append(Mx)
            fgs.append(fg + Mc)
            fes.append(fe + Mc)
            if hamiltonian:
                H += float(term.energy.momentum(x, xd) @ xd) - term.energy.value(x, xd)
        if not Js:
            raise SingularMetricError("every fabric term is switched off; the root metric is zero")
        # one stacked pullback instead of a small product per leaf
        J = np.vstack(Js)
        JT = J.T
        M = JT @ scipy.linalg.block_diag(*Ms) @ J
        f_geom = JT @ np.concatenate(fgs)
        f_energy = JT @ np.concatenate(fes)
        return FabricEval(M, f_geom, f_energy, energized_force_eval(M, f_energy, f_geom, qd), H)

    # lazy views -------------------------------------------------------------

    def energy(self) -> EnergyLagrangian:
        """Root energy: the sum of every pulled-back term energy."""
        return sum_energies([pulled_energy(term.energy, tm) for tm, term in self.leaves], "fabric")

    def generator(self) -> GeometryGenerator:
        """Root generator ``h2 = M^-1 f_geom`` (before energization)."""
        return GeometryGenerator(self.root_dim, lambda q, qd: -self.evaluate(q, qd).policy(), "fabric")

    def geometry_spec(self) -> Spec:
        return Spec(self.root_dim, lambda q, qd: self.evaluate(q, qd).M,
                    lambda q, qd: self.evaluate(q, qd).f_geom, "fabric_geometry")

    def energized_spec(self) -> Spec:
        return Spec(self.root_dim, lambda q, qd: self.evaluate(q, qd).M,
                    lambda q, qd: self.evaluate(q, qd).f_energized, "fabric")

    def hamiltonian(self, q, qd) -> float:
        """Sum of the term energies' ``p^T xd - L`` at ``(q, qd)``."""
        q = _vec(q, self.root_dim, "q")
        qd = _vec(qd, self.root_dim, "qd")
        return sum(float(term.energy.momentum(x, xd) @ xd) - term.energy.value(x, xd)
                   for term, x, xd, _, _ in self._leaf_states(q, qd))

    def energized_accel(self, q, qd, psi: Potential | None = None) -> np.ndarray:
        """Energized fabric acceleration, optionally forced by ``psi``."""
        ev = self.evaluate(q, qd, hamiltonian=False)
        f = ev.f_energized if psi is None else ev.f_energized + psi.gradient(q)
        return -solve_metric(ev.M, f)

    def fabric_alpha(self, q, qd) -> float:
        """Energization coefficient of the root generator under the root energy."""
        ev = self.evaluate(q, qd, hamiltonian=False)
        return alpha_eval(ev.M, ev.f_energy, ev.f_geom, _vec(qd))


def damped_accel(fabric: GeometricFabric, psi: Potential | None, damping: float):
    """``accel_fn(t, q, qd)`` of the forced, damped energized fabric with ``B = damping * M``."""
    psi = psi or zero_potential(fabric.root_dim)

    def accel(t, q, qd):
        ev = fabric.evaluate(q, qd, hamiltonian=False)
        return -solve_metric(ev.M, ev.f_energized + psi.gradient(q) + damping * (ev.M @ qd))

    return accel


def root_eval(ev: FabricEval) -> SpecEval:
    return SpecEval(ev.M, ev.f_energized)
