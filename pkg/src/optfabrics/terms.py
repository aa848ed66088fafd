"""Behavior terms: each one pairs an HD2 generator with a Finsler energy.

Generators are written as ``xdd + h2(x, xd) = 0``, so a term that wants to
accelerate toward a point ``g`` has ``h2`` pointing *away* from ``g``. The
sign of ``h2`` is stated on every constructor.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .energization import GeometryGenerator, check_hd2
from .energy import (EnergyLagrangian, FinslerReport, conformal_energy, euclidean_energy,
                     validate_finsler)
from .spec import FabricError, Potential, Spec, _vec

METRIC_KINDS = ("constant", "gaussian")


@dataclass(frozen=True)
class TermParams:
    """Gains and length scales shared by the term constructors.

    ``lam`` is a term's priority weight and ``lam_g`` the joint-limit
    generator gain. ``alpha_psi`` sharpens the soft-distance shape and
    ``alpha3``/``alpha4`` shape the optional limit barrier potential.
    """

    k: float = 1.0
    lam: float = 1.0
    lam_g: float = 1.0
    sigma: float = 0.3
    alpha_psi: float = 10.0
    alpha3: float = 1e-3
    alpha4: float = 10.0
    goal: tuple | None = None
    q0: tuple | None = None
    floor_normal: tuple = (0.0, 1.0)
    floor_height: float = 0.0
    clearance: float = 0.3
    metric: str = "constant"
    metric_floor: float = 0.1

    def __post_init__(self):
        for name in ("k", "lam", "lam_g", "sigma", "alpha_psi", "alpha3", "alpha4", "clearance", "metric_floor"):
            val = getattr(self, name)
            if not (np.isfinite(val) and val > 0):
                raise ValueError(f"{name} must be a positive number, got {val!r}")
        if abs(np.linalg.norm(self.floor_normal) - 1.0) > 1e-9:
            raise ValueError("floor_normal must be a unit vector")
        if self.metric not in METRIC_KINDS:
            raise ValueError(f"metric must be one of {METRIC_KINDS}, got {self.metric!r}")
        if self.metric_floor > 1:
            raise ValueError("metric_floor must lie in (0, 1]")


@dataclass(frozen=True)
class FabricTerm:
    dim: int
    generator: GeometryGenerator
    energy: EnergyLagrangian
    label: str = ""

    def __post_init__(self):
        if self.generator.dim != self.dim or self.energy.dim != self.dim:
            raise FabricError(f"term {self.label!r}: generator, energy and task space dimensions differ")

    def evaluate(self, x, v):
        """``(M_e, M_e h2, f_e)``: shared metric, geometry force and energy force."""
        M, f = self.energy.terms(x, v)
        return M, M @ self.generator.accel_fn(x, v), f

    def geometry_spec(self) -> Spec:
        """The term lowered to a ``(M_e, M_e h2)`` spec built from its generator."""
        return Spec(self.dim, self.energy.mass, lambda x, v: self.energy.mass(x, v) @ self.generator(x, v),
                    f"geometry({self.label})")

    def energy_spec(self) -> Spec:
        return self.energy.spec()

    def check(self, sample_count: int = 1000, rng_seed: int = 0, sampler=None) -> tuple[float, FinslerReport]:
        """HD2 violation of the generator and the Finsler report of the energy."""
        hd2 = check_hd2(self.generator, sample_count, rng_seed, sampler=sampler)
        return hd2, validate_finsler(self.energy, sample_count, rng_seed, sampler=sampler)


# ---------------------------------------------------------------------------
# potentials


def soft_distance(x, goal, k: float, alpha_psi: float):
    """Smoothed distance ``k * log(2 cosh(alpha r)) / alpha`` and its gradient.

    The gradient is ``k tanh(alpha r) r_hat``: zero at the goal and of norm
    approaching ``k`` far away.
    """
    d = np.asarray(x, dtype=float) - goal
    r = float(np.sqrt(d @ d))
    value = k * (r + np.logaddexp(0.0, -2.0 * alpha_psi * r) / alpha_psi)
    if r == 0.0:
        return value, np.zeros_like(d)
    return value, (k * np.tanh(alpha_psi * r) / r) * d


def soft_distance_potential(x, x_g, k: float, alpha_psi: float):
    """Value and gradient of the soft-distance potential at ``x``."""
    if k <= 0 or alpha_psi <= 0:
        raise ValueError("k and alpha_psi must be positive")
    return soft_distance(_vec(x), _vec(x_g), k, alpha_psi)


def soft_distance_field(goal, k: float, alpha_psi: float, label: str = "soft_distance") -> Potential:
    goal = _vec(goal)
    if k <= 0 or alpha_psi <= 0:
        raise ValueError("k and alpha_psi must be positive")
    return Potential(goal.shape[0], lambda x: soft_distance(x, goal, k, alpha_psi)[0],
                     lambda x: soft_distance(x, goal, k, alpha_psi)[1], label)


def limit_barrier_potential(params: TermParams) -> Potential:
    """``alpha3 / x^2 + softplus(-alpha4 x) / alpha4`` on a limit distance ``x > 0``."""
    a3, a4 = params.alpha3, params.alpha4

    def value(x):
        return a3 / x[0] ** 2 + np.logaddexp(0.0, -a4 * x[0]) / a4

    def grad(x):
        return np.array([-2.0 * a3 / x[0] ** 3 - 1.0 / (1.0 + np.exp(a4 * x[0]))])

    return Potential(1, value, grad, "limit_barrier")


# ---------------------------------------------------------------------------
# terms


def _toward(goal, k: float, alpha_psi: float):
    """``h2 = k |v|^2 dpsi1(x)``, which accelerates toward ``goal``."""

    def h2(x, v):
        d = x - goal
        r = float(np.sqrt(d @ d))
        if r == 0.0:
            return np.zeros_like(d)
        return (k * float(v @ v) * np.tanh(alpha_psi * r) / r) * d

    return h2


def attractor_term(x_g, params: TermParams) -> tuple[FabricTerm, Potential]:
    """Goal attraction in a task space, with its driving potential.

    ``h2 = k |v|^2 tanh(alpha r) r_hat`` with ``r_hat`` pointing away from
    the goal, so the motion bends toward it. The energy is
    ``lam/2 |v|^2`` or, with ``metric="gaussian"``, the conformal weight
    ``lam (floor + (1 - floor) exp(-r^2 / 2 sigma^2))``.
    """
    goal = _vec(x_g)
    dim = goal.shape[0]
    gen = GeometryGenerator(dim, _toward(goal, params.k, params.alpha_psi), "attractor")
    if params.metric == "constant":
        energy = euclidean_energy(dim, params.lam, "attractor")
    else:
        lam, fl, s2 = params.lam, params.metric_floor, params.sigma ** 2

        def w(x):
            d = x - goal
            return lam * (fl + (1.0 - fl) * np.exp(-0.5 * float(d @ d) / s2))

        def dw(x):
            d = x - goal
            return -lam * (1.0 - fl) * np.exp(-0.5 * float(d @ d) / s2) / s2 * d

        energy = conformal_energy(dim, w, dw, label="attractor")
    psi = soft_distance_field(goal, params.k, params.alpha_psi, "attractor")
    return FabricTerm(dim, gen, energy, "attractor"), psi


def _approaching(x, v):
    return v[0] < 0


def joint_limit_term(limit_value, side: str, params: TermParams) -> FabricTerm:
    """Barrier on the 1-D distance ``x`` to a joint limit.

    ``limit_value`` and ``side`` only label the term; the distance itself
    comes from the limit task map. ``h2 = -s lam_g xd^2 / x`` pushes ``x``
    away from zero while the gate ``s = [xd < 0]`` is on, and the energy is
    ``s lam xd^2 / (2 x)``. Raises once the limit is reached (``x <= 0``).
    """
    if side not in ("lower", "upper"):
        raise ValueError(f"side must be 'lower' or 'upper', got {side!r}")
    lam, lam_g = params.lam, params.lam_g

    def distance(x):
        d = float(x[0])
        if not d > 0:
            raise FabricError(f"joint limit {side} {limit_value} violated: distance {d}")
        return d

    def h2(x, v):
        if v[0] >= 0:
            return np.zeros(1)
        return np.array([-lam_g * v[0] ** 2 / distance(x)])

    def w(x):
        return lam / distance(x)

    def dw(x):
        return np.array([-lam / distance(x) ** 2])

    label = f"limit_{side}"
    energy = conformal_energy(1, w, dw, gate_fn=_approaching, label=label)
    return FabricTerm(1, GeometryGenerator(1, h2, label), energy, label)


def default_config_term(q0, params: TermParams) -> FabricTerm:
    """Redundancy resolution: ``h2 = k |qd|^2 dpsi1(q; q0)`` with energy ``lam/2 |qd|^2``."""
    q0 = _vec(q0)
    dim = q0.shape[0]
    gen = GeometryGenerator(dim, _toward(q0, params.k, params.alpha_psi), "default_config")
    return FabricTerm(dim, gen, euclidean_energy(dim, params.lam, "default_config"), "default_config")


def base_metric_term(dim: int, params: TermParams) -> FabricTerm:
    """A flat term: ``h2 = 0`` with energy ``lam/2 |qd|^2``.

    It adds no geometry of its own and keeps the summed metric invertible
    when every other term is switched off.
    """
    zero = np.zeros(dim)
    gen = GeometryGenerator(dim, lambda x, v: zero, "base_metric")
    return FabricTerm(dim, gen, euclidean_energy(dim, params.lam, "base_metric"), "base_metric")


def lift_term(floor_height: float, params: TermParams) -> FabricTerm:
    """Lift away from the floor: ``h2 = -k |v|^2 n``, weight ``lam exp(-height / sigma)``."""
    n = np.asarray(params.floor_normal, dtype=float)
    lam, sig, k = params.lam, params.sigma, params.k
    dim = n.shape[0]

    def w(x):
        return lam * np.exp(-(float(n @ x) - floor_height) / sig)

    def dw(x):
        return -w(x) / sig * n

    gen = GeometryGenerator(dim, lambda x, v: (-k * float(v @ v)) * n, "lift")
    return FabricTerm(dim, gen, conformal_energy(dim, w, dw, label="lift"), "lift")


def approach_term(x_g, params: TermParams) -> FabricTerm:
    """Final approach toward ``x_g`` with a priority that peaks above the goal.

    ``h2 = k |v|^2 dpsi1(x; x_g)`` as in the attractor; the weight is
    ``lam exp(-s^2 / 2 sigma^2)`` in the horizontal distance ``s``.
    """
    goal = _vec(x_g)
    n = np.asarray(params.floor_normal, dtype=float)
    lam, s2 = params.lam, params.sigma ** 2
    dim = goal.shape[0]

    def horizontal(x):
        d = x - goal
        return d - n * float(n @ d)

    def w(x):
        h = horizontal(x)
        return lam * np.exp(-0.5 * float(h @ h) / s2)

    def dw(x):
        return -w(x) / s2 * horizontal(x)

    gen = GeometryGenerator(dim, _toward(goal, params.k, params.alpha_psi), "approach")
    return FabricTerm(dim, gen, conformal_energy(dim, w, dw, label="approach"), "approach")


def behavior_shaping_terms(floor_height: float, clearance: float, x_g,
                           params: TermParams, approach_params: TermParams | None = None) -> list[FabricTerm]:
    """Lift and vertical-approach terms on the end-effector space.

    ``approach_params`` lets the approach term use its own gains; by
    default both terms share ``params``.
    """
    if clearance <= 0:
        raise ValueError("clearance must be positive")
    return [lift_term(floor_height, params), approach_term(x_g, approach_params or params)]


def horizontal_distance(x, x_g, normal=(0.0, 1.0)) -> float:
    n = np.asarray(normal, dtype=float)
    d = np.asarray(x, dtype=float) - np.asarray(x_g, dtype=float)
    return float(np.linalg.norm(d - n * float(n @ d)))
