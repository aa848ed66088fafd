"""Zero-work projection, the energization coefficient and bent generators.

A generator ``xdd + h2(x, xd) = 0`` is energized by an energy ``L_e`` when a
multiple of the velocity is added so that ``H_e`` stays constant:

    xdd = -h2 - alpha * xd,   alpha = -(v'M v)^-1 v'(M h2 - f_e)

The projector is computed as ``P = M R`` with
``R = M^-1 - v v' / (v'M v)``; no matrix square root is formed.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .energy import HOMOGENEITY_ALPHAS, EnergyLagrangian, default_sampler
from .spec import FabricError, Spec, SpecEval, _vec, canonical_spec, solve_metric

#: below this velocity norm the energized policy falls back to ``-h2``
VELOCITY_GUARD = 1e-9


class ZeroVelocityError(FabricError, ValueError):
    """The projector and coefficient are undefined at zero velocity."""


@dataclass(frozen=True)
class GeometryGenerator:
    """An HD2 acceleration field ``h2`` defining ``xdd + h2(x, xd) = 0``."""

    dim: int
    accel_fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    label: str = ""

    def __call__(self, x, v) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.accel_fn(x, v), dtype=float))

    def spec(self) -> Spec:
        return canonical_spec(self.dim, self.__call__, self.label)


def hd2_violation(g: GeometryGenerator, x, v, alphas=HOMOGENEITY_ALPHAS) -> float:
    """Largest ``|h(x, a v) - a^2 h(x, v)| / (1 + a^2 |h(x, v)|)`` over ``alphas``."""
    h = g(x, v)
    worst = 0.0
    for a in alphas:
        err = np.linalg.norm(g(x, a * v) - a * a * h) / (1.0 + a * a * np.linalg.norm(h))
        worst = max(worst, float(err))
    return worst


def check_hd2(g: GeometryGenerator, sample_count: int = 100, rng_seed: int = 0, *, sampler=None,
              alphas=HOMOGENEITY_ALPHAS) -> float:
    """Worst HD2 violation of ``g`` over seeded random states."""
    rng = np.random.default_rng(rng_seed)
    sampler = sampler or default_sampler(g.dim)
    worst = 0.0
    for _ in range(sample_count):
        x, v = sampler(rng)
        worst = max(worst, hd2_violation(g, x, v, alphas))
    return worst


# ---------------------------------------------------------------------------
# point-evaluation kernels


def _speed_sq(M: np.ndarray, v: np.ndarray) -> float:
    s = float(v @ M @ v)
    if np.linalg.norm(v) < VELOCITY_GUARD or s == 0.0:
        raise ZeroVelocityError("velocity is zero; projector undefined")
    return s


def projector_eval(M, v) -> tuple[np.ndarray, np.ndarray]:
    """``(P, R)`` for metric ``M`` and velocity ``v``."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    v = _vec(v, M.shape[0], "velocity")
    s = _speed_sq(M, v)
    R = solve_metric(M, np.eye(M.shape[0])) - np.outer(v, v) / s
    return M @ R, R


def alpha_eval(M, f_e, Mh, v) -> float:
    """Energization coefficient from ``M``, ``f_e`` and the product ``M h``."""
    s = _speed_sq(M, v)
    return -float(v @ (Mh - f_e)) / s


def energized_force_eval(M, f_e, Mh, v) -> np.ndarray:
    """``f_e + P[M h - f_e]``, or ``M h`` (the raw policy) near zero velocity."""
    v = np.asarray(v, dtype=float)
    if np.linalg.norm(v) < VELOCITY_GUARD:
        return np.asarray(Mh, dtype=float)
    w = Mh - f_e
    Mv = M @ v
    s = float(v @ Mv)
    if s == 0.0:
        return np.asarray(Mh, dtype=float)
    return f_e + w - Mv * (float(v @ w) / s)


# ---------------------------------------------------------------------------
# public operations on energies


def projector(E: EnergyLagrangian, x, v) -> tuple[np.ndarray, np.ndarray]:
    """Zero-work projector ``P_e`` and ``R_pe`` of energy ``E`` at ``(x, v)``.

    Raises
    ------
    ZeroVelocityError
        If ``v`` is (numerically) zero.
    """
    x = _vec(x, E.dim, "position")
    v = _vec(v, E.dim, "velocity")
    return projector_eval(E.mass(x, v), v)


def energization_coefficient(h, E: EnergyLagrangian, x, v) -> float:
    """``alpha`` such that ``xdd = -h - alpha v`` keeps ``H_e`` constant."""
    x = _vec(x, E.dim, "position")
    v = _vec(v, E.dim, "velocity")
    h = _vec(h, E.dim, "h")
    M = E.mass(x, v)
    return alpha_eval(M, E.force(x, v), M @ h, v)


def energize(g: GeometryGenerator, E: EnergyLagrangian) -> Spec:
    """The energized spec ``(M_e, f_e + P_e[M_e h2 - f_e])``."""
    if g.dim != E.dim:
        raise FabricError("generator and energy dimensions differ")

    def force(x, v):
        M = E.mass(x, v)
        return energized_force_eval(M, E.force(x, v), M @ g(x, v), v)

    return Spec(E.dim, E.mass, force, f"energized({g.label})")


def bent_generator(g: GeometryGenerator, E: EnergyLagrangian) -> GeometryGenerator:
    """``h2~ = M_e^-1 f_e + R[M_e h2 - f_e]``, the policy view of :func:`energize`.

    For a Finsler ``E`` the result is again HD2.
    """
    spec = energize(g, E)

    def accel(x, v):
        ev = spec(x, v)
        return solve_metric(ev.M, ev.f)

    return GeometryGenerator(g.dim, accel, f"bent({g.label})")


def energized_eval(M, f_e, f_geom, v) -> SpecEval:
    """Energize an already-evaluated geometry spec ``(M, f_geom = M h2)``."""
    return SpecEval(M, energized_force_eval(M, f_e, f_geom, v))
