"""Energy Lagrangians and their Euler-Lagrange terms.

Every shipped energy supplies its derivatives analytically; the finite
difference helpers at the bottom of the module exist to cross-check them.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .spec import (DimensionError, FabricError, Potential, Spec, SpecEval, TaskMap, _vec,
                   pullback_eval, solve_metric)

HOMOGENEITY_ALPHAS = (0.5, 2.0, 4.0)


@dataclass(frozen=True)
class EnergyLagrangian:
    """A stationary Lagrangian ``L_e(x, xd)`` with its derivative bundle.

    ``momentum_fn`` is ``dL/dxd``, ``mass_fn`` is ``d2L/dxd2`` and
    ``force_fn`` is ``(d2L/dxd dx) xd - dL/dx``. ``active_fn``, when set,
    marks the states where a velocity-gated energy is switched on; positivity
    and invertibility are only required there; where it is false the energy
    and all its derivatives vanish. ``terms_fn(x, v) -> (M, f)`` optionally
    fuses ``mass_fn`` and ``force_fn``.
    """

    dim: int
    value_fn: Callable[[np.ndarray, np.ndarray], float]
    momentum_fn: Callable
    mass_fn: Callable
    force_fn: Callable
    is_finsler: bool = False
    active_fn: Callable | None = None
    label: str = ""
    terms_fn: Callable | None = None

    def value(self, x, v) -> float:
        return float(self.value_fn(x, v))

    def momentum(self, x, v) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.momentum_fn(x, v), dtype=float))

    def mass(self, x, v) -> np.ndarray:
        return np.atleast_2d(np.asarray(self.mass_fn(x, v), dtype=float))

    def force(self, x, v) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.force_fn(x, v), dtype=float))

    def terms(self, x, v) -> tuple[np.ndarray, np.ndarray]:
        """``(mass, force)`` at one state."""
        if self.terms_fn is not None:
            return self.terms_fn(x, v)
        return self.mass(x, v), self.force(x, v)

    def active(self, x, v) -> bool:
        return True if self.active_fn is None else bool(self.active_fn(x, v))

    def spec(self) -> Spec:
        return Spec(self.dim, self.mass, self.force, self.label)


# ---------------------------------------------------------------------------
# operations


def el_terms(E: EnergyLagrangian, x, v) -> SpecEval:
    """The energy equations ``(M_e, f_e)`` at ``(x, v)``.

    Raises SingularMetricError when ``M_e`` cannot be inverted.
    """
    x = _vec(x, E.dim, "position")
    v = _vec(v, E.dim, "velocity")
    M = E.mass(x, v)
    solve_metric(M, np.zeros(E.dim))
    return SpecEval(M, E.force(x, v))


def hamiltonian(E: EnergyLagrangian, x, v) -> float:
    """``H_e = p_e^T v - L_e``."""
    x = _vec(x, E.dim, "position")
    v = _vec(v, E.dim, "velocity")
    return float(E.momentum(x, v) @ v - E.value(x, v))


def energy_rate(E: EnergyLagrangian, x, v, a) -> float:
    """Time derivative of ``H_e`` along a trajectory with acceleration ``a``."""
    x = _vec(x, E.dim, "position")
    v = _vec(v, E.dim, "velocity")
    a = _vec(a, E.dim, "acceleration")
    return float(v @ (E.mass(x, v) @ a + E.force(x, v)))


@dataclass
class FinslerReport:
    positivity_ok: bool
    hd1_ok: bool
    hd0_mass_ok: bool
    hd2_force_ok: bool
    invertibility_ok: bool
    max_violation: float
    samples: int = 0
    active_samples: int = 0
    violations: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.positivity_ok and self.hd1_ok and self.hd0_mass_ok and self.hd2_force_ok and self.invertibility_ok


def _rel(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    diff = float(np.max(np.abs(a - b))) if a.size else 0.0
    if diff == 0.0:
        return 0.0
    return diff / max(float(np.max(np.abs(b))), 1e-300)


def default_sampler(dim: int):
    def sample(rng: np.random.Generator):
        x = rng.uniform(-1.0, 1.0, dim)
        v = rng.normal(size=dim)
        while np.linalg.norm(v) < 1e-3:
            v = rng.normal(size=dim)
        return x, v

    return sample


def validate_finsler(E: EnergyLagrangian, sample_count: int = 100, rng_seed: int = 0, *,
                     sampler=None, alphas: Sequence[float] = HOMOGENEITY_ALPHAS,
                     tol: float = 1e-9) -> FinslerReport:
    """Check the Finsler axioms of ``L_g = sqrt(2 L_e)`` on random samples.

    Velocities are drawn away from zero. Failures are reported, not raised.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be at least 1")
    rng = np.random.default_rng(rng_seed)
    sampler = sampler or default_sampler(E.dim)
    worst = {"positivity": 0.0, "hd1": 0.0, "hd0_mass": 0.0, "hd2_force": 0.0, "invertibility": 0.0}
    active = 0
    for _ in range(sample_count):
        x, v = sampler(rng)
        Le = E.value(x, v)
        M = E.mass(x, v)
        f = E.force(x, v)
        is_active = E.active(x, v)
        if is_active:
            active += 1
            if not Le > 0:
                worst["positivity"] = max(worst["positivity"], 1.0 + abs(Le))
            try:
                solve_metric(M, np.zeros(E.dim))
            except FabricError:
                worst["invertibility"] = 1.0
        Lg = np.sqrt(2.0 * max(Le, 0.0))
        for a in alphas:
            Le_a = E.value(x, a * v)
            Lg_a = np.sqrt(2.0 * max(Le_a, 0.0))
            worst["hd1"] = max(worst["hd1"], _rel(Lg_a, a * Lg))
            worst["hd0_mass"] = max(worst["hd0_mass"], _rel(E.mass(x, a * v), M))
            worst["hd2_force"] = max(worst["hd2_force"], _rel(E.force(x, a * v), a * a * f))
    return FinslerReport(
        positivity_ok=worst["positivity"] == 0.0,
        hd1_ok=worst["hd1"] <= tol,
        hd0_mass_ok=worst["hd0_mass"] <= tol,
        hd2_force_ok=worst["hd2_force"] <= tol,
        invertibility_ok=worst["invertibility"] == 0.0,
        max_violation=max(worst.values()),
        samples=sample_count,
        active_samples=active,
        violations=worst,
    )


# ---------------------------------------------------------------------------
# finite differences


def fd_gradient(fn, z: np.ndarray, step: float) -> np.ndarray:
    out = []
    for i in range(z.shape[0]):
        dz = np.zeros_like(z)
        dz[i] = step
        out.append((np.asarray(fn(z + dz), dtype=float) - np.asarray(fn(z - dz), dtype=float)) / (2 * step))
    return np.array(out)


def numeric_el_terms(value_fn, x, v, step: float = 1e-4) -> SpecEval:
    """``(M_e, f_e)`` from the Lagrangian value alone, by nested central differences."""
    x = _vec(x)
    v = _vec(v)

    def p(xx, vv):
        return fd_gradient(lambda w: value_fn(xx, w), vv, step)

    M = fd_gradient(lambda w: p(x, w), v, step).T
    dpdx = fd_gradient(lambda y: p(y, v), x, step).T
    dLdx = fd_gradient(lambda y: value_fn(y, v), x, step)
    return SpecEval(0.5 * (M + M.T), dpdx @ v - dLdx)


def _unit_rel(a, b) -> float:
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b)))) / max(1.0, float(np.max(np.abs(b))))


def finite_diff_check(E: EnergyLagrangian, x, v, step: float = 1e-5) -> float:
    """Largest error of the supplied ``p_e``, ``M_e`` and ``f_e``.

    ``p_e`` is compared to differences of ``value_fn``; ``M_e`` and ``f_e``
    to differences of the (already checked) momentum. Errors are relative
    with a unit floor so that vanishing quantities are compared absolutely.
    """
    x = _vec(x, E.dim, "position")
    v = _vec(v, E.dim, "velocity")
    p_num = fd_gradient(lambda w: E.value(x, w), v, step)
    M_num = fd_gradient(lambda w: E.momentum(x, w), v, step).T
    dpdx = fd_gradient(lambda y: E.momentum(y, v), x, step).T
    dLdx = fd_gradient(lambda y: E.value(y, v), x, step)
    f_num = dpdx @ v - dLdx
    return max(_unit_rel(E.momentum(x, v), p_num),
               _unit_rel(E.mass(x, v), M_num),
               _unit_rel(E.force(x, v), f_num))


# ---------------------------------------------------------------------------
# shipped energies


def euclidean_energy(dim: int, scale: float = 1.0, label: str = "euclidean") -> EnergyLagrangian:
    """``L_e = (scale/2) |v|^2``."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    M = scale * np.eye(dim)
    zero = np.zeros(dim)
    return EnergyLagrangian(
        dim,
        lambda x, v: 0.5 * scale * float(v @ v),
        lambda x, v: scale * np.asarray(v, dtype=float),
        lambda x, v: M,
        lambda x, v: zero,
        is_finsler=True,
        label=label,
        terms_fn=lambda x, v: (M, zero),
    )


def riemannian_energy(dim: int, metric_fn, metric_grad_fn, *, gate_fn=None,
                      potential: Potential | None = None, label: str = "riemannian") -> EnergyLagrangian:
    """``L_e = (s/2) v^T G(x) v - psi(x)``.

    ``metric_grad_fn(x)`` returns ``dG`` with ``dG[i, j, k] = dG_ij/dx_k``.
    ``gate_fn(x, v)`` is an optional piecewise-constant, degree-0 factor
    ``s`` in {0, 1}; a potential makes the energy non-Finsler.
    """

    def gate(x, v):
        return 1.0 if gate_fn is None else float(gate_fn(x, v))

    def value(x, v):
        val = 0.5 * gate(x, v) * float(v @ metric_fn(x) @ v)
        return val - potential.value_fn(x) if potential is not None else val

    def momentum(x, v):
        return gate(x, v) * (metric_fn(x) @ v)

    def mass(x, v):
        return gate(x, v) * np.asarray(metric_fn(x), dtype=float)

    def force(x, v):
        s = gate(x, v)
        f = np.zeros(dim)
        if s:
            dG = metric_grad_fn(x)
            f = s * (np.einsum("ijk,j,k->i", dG, v, v) - 0.5 * np.einsum("ijk,i,j->k", dG, v, v))
        if potential is not None:
            f = f + potential.gradient_fn(x)
        return f

    active = None if gate_fn is None else (lambda x, v: gate(x, v) > 0)
    return EnergyLagrangian(dim, value, momentum, mass, force, is_finsler=potential is None,
                            active_fn=active, label=label)


def conformal_energy(dim: int, weight_fn, weight_grad_fn, *, gate_fn=None,
                     label: str = "conformal") -> EnergyLagrangian:
    """``L_e = (s/2) w(x) |v|^2`` for a positive scalar weight ``w``."""
    eye = np.eye(dim)

    def gate(x, v):
        return 1.0 if gate_fn is None else float(gate_fn(x, v))

    def force(x, v):
        s = gate(x, v)
        if not s:
            return np.zeros(dim)
        g = np.asarray(weight_grad_fn(x), dtype=float)
        return s * ((g @ v) * v - 0.5 * float(v @ v) * g)

    def terms(x, v):
        s = gate(x, v)
        if not s:
            return np.zeros((dim, dim)), np.zeros(dim)
        g = np.asarray(weight_grad_fn(x), dtype=float)
        return (s * weight_fn(x)) * eye, s * ((g @ v) * v - 0.5 * float(v @ v) * g)

    active = None if gate_fn is None else (lambda x, v: gate(x, v) > 0)
    return EnergyLagrangian(
        dim,
        lambda x, v: 0.5 * gate(x, v) * weight_fn(x) * float(v @ v),
        lambda x, v: gate(x, v) * weight_fn(x) * np.asarray(v, dtype=float),
        lambda x, v: gate(x, v) * weight_fn(x) * eye,
        force,
        is_finsler=True,
        active_fn=active,
        label=label,
        terms_fn=terms,
    )


def pulled_energy(E: EnergyLagrangian, tm: TaskMap) -> EnergyLagrangian:
    """``L(q, qd) = L_e(phi(q), J qd)`` with chain-rule derivatives."""
    if tm.codomain_dim != E.dim:
        raise DimensionError("energy and task map dimensions differ")

    def value(q, qd):
        return E.value(tm(q), tm.jacobian(q) @ qd)

    def momentum(q, qd):
        J = tm.jacobian(q)
        return J.T @ E.momentum(tm(q), J @ qd)

    def mass(q, qd):
        J = tm.jacobian(q)
        return J.T @ E.mass(tm(q), J @ qd) @ J

    def force(q, qd):
        x, xd, J, c = tm.evaluate(q, qd)
        return pullback_eval(SpecEval(E.mass(x, xd), E.force(x, xd)), J, c).f

    active = None
    if E.active_fn is not None:
        active = lambda q, qd: E.active(tm(q), tm.jacobian(q) @ qd)  # noqa: E731
    return EnergyLagrangian(tm.domain_dim, value, momentum, mass, force, E.is_finsler, active,
                            f"pull({E.label})")


def sum_energies(energies: Sequence[EnergyLagrangian], label: str = "sum") -> EnergyLagrangian:
    energies = list(energies)
    if not energies:
        raise FabricError("cannot sum an empty list of energies")
    dim = energies[0].dim
    if any(E.dim != dim for E in energies):
        raise DimensionError("energies in a sum must share one dimension")
    return EnergyLagrangian(
        dim,
        lambda x, v: sum(E.value(x, v) for E in energies),
        lambda x, v: sum(E.momentum(x, v) for E in energies),
        lambda x, v: sum(E.mass(x, v) for E in energies),
        lambda x, v: sum(E.force(x, v) for E in energies),
        is_finsler=all(E.is_finsler for E in energies),
        label=label,
    )
