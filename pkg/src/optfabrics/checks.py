"""Invariant suite behind ``optfabrics check``.

Every check reports a name, a tolerance and the observed worst value; a
check passes when ``observed <= tolerance``. The catalogue helpers list the
shipped energies, generators, potentials and task maps with samplers that
keep each one inside its domain. Named faults swap in a deliberately broken
component so that the suite can prove it notices.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq

from .arm import default_arm, ee_taskmap, jacobian_fd_check, joint_taskmaps
from .energization import GeometryGenerator, energization_coefficient, hd2_violation, projector_eval
from .energy import (EnergyLagrangian, euclidean_energy, finite_diff_check, pulled_energy, riemannian_energy,
                     validate_finsler)
from .fabric import GeometricFabric, damped_accel
from .simulate import path_length_stop, resample_by_arclength, rollout
from .spec import Potential, TaskMap, gradient_fd_check, identity_map
from .terms import (FabricTerm, TermParams, approach_term, attractor_term, base_metric_term,
                    default_config_term, joint_limit_term, lift_term, limit_barrier_potential,
                    soft_distance_field)

FAULTS = ("energy_force", "jacobian", "generator")

READY_Q = np.array([1.2, -0.9, -0.9])
GOAL = np.array([2.0, 1.2])


@dataclass
class CheckResult:
    name: str
    tolerance: float
    observed: float
    detail: str = ""

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.observed) and self.observed <= self.tolerance)

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        extra = f"  ({self.detail})" if self.detail else ""
        return f"{flag}  {self.name:<32} observed={self.observed:.3e}  tol={self.tolerance:.0e}{extra}"


# ---------------------------------------------------------------------------
# samplers


def box_sampler(dim: int, low=-1.0, high=1.0, min_speed=1e-2):
    """Positions uniform in a box, velocities standard normal with each component away from zero.

    Keeping every velocity component away from zero keeps sign-gated energies
    on one side of their gate for small finite-difference steps.
    """

    def sample(rng):
        x = rng.uniform(low, high, dim)
        v = rng.normal(size=dim)
        v = np.where(np.abs(v) < min_speed, np.copysign(min_speed, v), v)
        return x, v

    return sample


def limit_sampler(approaching: bool | None = None):
    """1-D limit distances in ``[0.2, 3]``; the velocity sign is random unless fixed."""

    def sample(rng):
        x = np.array([rng.uniform(0.2, 3.0)])
        speed = rng.uniform(0.05, 2.0)
        sign = rng.choice([-1.0, 1.0]) if approaching is None else (-1.0 if approaching else 1.0)
        return x, np.array([sign * speed])

    return sample


# ---------------------------------------------------------------------------
# catalogue


def _shaping_params() -> TermParams:
    return TermParams(k=8.0, lam=2.0, sigma=0.4, clearance=0.3)


def shipped_terms() -> list[tuple[str, FabricTerm, object]]:
    """``(label, term, sampler)`` for every shipped term kind."""
    goal = GOAL
    params = TermParams(k=2.0, lam=1.0)
    return [
        ("attractor", attractor_term(goal, params)[0], box_sampler(2, -3, 3)),
        ("attractor_gaussian", attractor_term(goal, replace(params, metric="gaussian"))[0], box_sampler(2, -3, 3)),
        ("joint_limit_lower", joint_limit_term(-np.pi, "lower", TermParams(lam=0.1, lam_g=2.0)), limit_sampler()),
        ("joint_limit_upper", joint_limit_term(np.pi, "upper", TermParams(lam=0.1, lam_g=2.0)), limit_sampler()),
        ("default_config", default_config_term(READY_Q, TermParams(k=3.0)), box_sampler(3, -3, 3)),
        ("base_metric", base_metric_term(3, TermParams(lam=0.05)), box_sampler(3, -3, 3)),
        ("lift", lift_term(0.0, _shaping_params()), box_sampler(2, -0.5, 2.5)),
        ("approach", approach_term(goal, TermParams(k=3.0, lam=5.0, sigma=0.2)), box_sampler(2, -3, 3)),
    ]


def _rotation_metric_energy() -> EnergyLagrangian:
    """A non-conformal Riemannian energy ``1/2 v^T G(x) v`` with ``G = I + a a^T``, ``a = (sin x0, cos x1)``."""

    def G(x):
        a = np.array([np.sin(x[0]), np.cos(x[1])])
        return np.eye(2) + np.outer(a, a)

    def dG(x):
        a = np.array([np.sin(x[0]), np.cos(x[1])])
        da = np.array([[np.cos(x[0]), 0.0], [0.0, -np.sin(x[1])]])  # da[i, k] = d a_i / d x_k
        return np.einsum("ik,j->ijk", da, a) + np.einsum("i,jk->ijk", a, da)

    return riemannian_energy(2, G, dG, label="riemannian")


def shipped_energies(arm=None) -> list[tuple[str, EnergyLagrangian, object]]:
    """Every term energy, a general Riemannian energy and pullbacks through the arm."""
    arm = arm or default_arm()
    out = [(label, term.energy, sampler) for label, term, sampler in shipped_terms()]
    out.append(("riemannian", _rotation_metric_energy(), box_sampler(2, -2, 2)))
    out.append(("euclidean_unit", euclidean_energy(3), box_sampler(3)))
    ee = ee_taskmap(arm)
    out.append(("attractor@ee", pulled_energy(attractor_term(GOAL, TermParams(metric="gaussian"))[0].energy, ee),
                box_sampler(3, -np.pi, np.pi)))
    out.append(("lift@ee", pulled_energy(lift_term(0.0, _shaping_params()).energy, ee),
                box_sampler(3, -np.pi, np.pi)))
    return out


def shipped_potentials(arm=None) -> list[tuple[str, Potential, object]]:
    arm = arm or default_arm()
    soft = soft_distance_field(GOAL, 2.0, 10.0, "soft_distance")
    return [
        ("soft_distance", soft, lambda rng: rng.uniform(-3, 3, 2)),
        ("soft_distance@ee", soft.pullback(ee_taskmap(arm)), lambda rng: rng.uniform(-np.pi, np.pi, 3)),
        ("limit_barrier", limit_barrier_potential(TermParams()), lambda rng: np.array([rng.uniform(0.2, 3.0)])),
    ]


def shipped_taskmaps(arm=None) -> list[tuple[str, TaskMap]]:
    arm = arm or default_arm()
    return [("ee", ee_taskmap(arm)), ("identity", identity_map(arm.n_joints))] + \
        [(tm.label, tm) for tm in joint_taskmaps(arm)]


def reach_fabric(goal=GOAL, arm=None, limits: bool = True) -> GeometricFabric:
    """The reaching fabric on the default 3-link arm, without any potential."""
    arm = arm or default_arm()
    ee = ee_taskmap(arm)
    root = identity_map(arm.n_joints)
    leaves = [
        (ee, attractor_term(goal, TermParams(k=2.0, lam=1.0))[0]),
        (root, default_config_term(READY_Q, TermParams(k=3.0))),
        (root, base_metric_term(arm.n_joints, TermParams(lam=0.05))),
    ]
    if limits:
        lp = TermParams(lam=0.1, lam_g=2.0)
        for tm in joint_taskmaps(arm):
            side = "lower" if tm.label.startswith("lower") else "upper"
            leaves.append((tm, joint_limit_term(0.0, side, lp)))
    return GeometricFabric(arm.n_joints, leaves)


# ---------------------------------------------------------------------------
# faults


def _broken_energy() -> EnergyLagrangian:
    E = euclidean_energy(2, 1.0, "euclidean")
    return replace(E, force_fn=lambda x, v: E.force_fn(x, v) + 0.1, terms_fn=None, label="broken_force")


def _broken_taskmap(arm) -> TaskMap:
    tm = ee_taskmap(arm)
    return replace(tm, jacobian_fn=lambda q: tm.jacobian_fn(q) + 0.1, evaluate_fn=None, label="broken_jacobian")


def _broken_generator() -> GeometryGenerator:
    return GeometryGenerator(2, lambda x, v: float(v @ v) * x + 0.1, "broken_hd2")


# ---------------------------------------------------------------------------
# individual checks


def check_generators(samples: int, seed: int, faults=()) -> CheckResult:
    gens = [(label, term.generator, sampler) for label, term, sampler in shipped_terms()]
    if "generator" in faults:
        gens.append(("broken_hd2", _broken_generator(), box_sampler(2)))
    worst, who = 0.0, ""
    for label, g, sampler in gens:
        rng = np.random.default_rng(seed)
        for _ in range(samples):
            x, v = sampler(rng)
            err = hd2_violation(g, x, v)
            if err > worst:
                worst, who = err, label
    return CheckResult("homogeneity.generators_hd2", 1e-9, worst, who)


def check_energies_finsler(samples: int, seed: int) -> CheckResult:
    worst, who = 0.0, ""
    for label, term, sampler in shipped_terms():
        rep = validate_finsler(term.energy, samples, seed, sampler=sampler)
        if not rep.ok and rep.max_violation <= 1e-9:
            rep.max_violation = 1.0  # a boolean failure (positivity or invertibility)
        if rep.max_violation > worst:
            worst, who = rep.max_violation, label
    return CheckResult("homogeneity.finsler_energies", 1e-9, worst, who)


def random_spd(rng, dim: int, cond: float = 100.0) -> np.ndarray:
    """SPD matrix with eigenvalues log-uniform in ``[1, cond]`` and a random basis."""
    Q, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
    eig = np.exp(rng.uniform(0.0, np.log(cond), dim))
    return (Q * eig) @ Q.T


def check_projection(samples: int, seed: int) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    zero_work = idem = 0.0
    for _ in range(samples):
        dim = int(rng.integers(1, 7))
        M = random_spd(rng, dim)
        v = rng.normal(size=dim)
        w = rng.normal(size=dim)
        P, _ = projector_eval(M, v)
        zero_work = max(zero_work, abs(float(v @ P @ w)))
        idem = max(idem, float(np.max(np.abs(P @ P - P))))
    return [CheckResult("projection.zero_work", 1e-10, zero_work),
            CheckResult("projection.idempotent", 1e-10, idem)]


def check_energization_coefficient(samples: int, seed: int) -> CheckResult:
    """Closed-form ``alpha`` against a bracketing root of ``dH/dt(alpha) = 0``."""
    rng = np.random.default_rng(seed)
    E = _rotation_metric_energy()
    worst = 0.0
    for _ in range(samples):
        x = rng.uniform(-2, 2, 2)
        v = rng.normal(size=2)
        h = rng.normal(size=2) * 3
        M, f = E.mass(x, v), E.force(x, v)

        def rate(a):
            return float(v @ (M @ (-h - a * v) + f))

        lo, hi = -1.0, 1.0
        while rate(lo) * rate(hi) > 0:
            lo, hi = 2 * lo, 2 * hi
        root = brentq(rate, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)
        worst = max(worst, abs(energization_coefficient(h, E, x, v) - root))
    return CheckResult("energization.coefficient", 1e-8, worst)


def conservation_drift(fabric: GeometricFabric, q0, qd0, t_max: float, dt: float = 1e-3) -> float:
    """Largest relative deviation of the fabric energy along an unforced, undamped rollout."""
    traj = rollout(damped_accel(fabric, None, 0.0), (0.0, q0, qd0), dt, t_max,
                   record=lambda t, q, qd: {"H": fabric.hamiltonian(q, qd)})
    if traj.error:
        return np.inf
    H = traj.channel("H")
    return float(np.max(np.abs(H - H[0])) / abs(H[0]))


def check_conservation(t_max: float = 2.0) -> CheckResult:
    drift = conservation_drift(reach_fabric(), READY_Q, np.array([0.6, -0.4, 0.8]), t_max)
    return CheckResult("conservation.energized_fabric", 1e-6, drift, f"{t_max:g} s at dt=1e-3")


def path_deviation(fabric: GeometricFabric, q0, direction, speeds=(0.5, 1.0, 2.0),
                   length: float = 1.0, dt: float = 1e-3, count: int = 201) -> float:
    """Largest pointwise gap between unit-length paths started at different speeds."""
    accel = damped_accel(fabric, None, 0.0)
    direction = np.asarray(direction, dtype=float) / np.linalg.norm(direction)
    paths = []
    for s in speeds:
        traj = rollout(accel, (0.0, q0, s * direction), dt, 10.0 * length / min(speeds),
                       stop=path_length_stop(length))
        paths.append(resample_by_arclength(traj.q, count, length))
    ref = paths[0]
    return max(float(np.max(np.linalg.norm(p - ref, axis=1))) for p in paths[1:])


def check_path_consistency() -> CheckResult:
    dev = path_deviation(reach_fabric(), READY_Q, np.array([0.6, -0.4, 0.8]))
    return CheckResult("path_consistency", 1e-3, dev, "speeds 0.5, 1, 2")


def damped_energy_residual(fabric: GeometricFabric, psi: Potential, damping: float, q0, qd0,
                           t_max: float = 3.0, dt: float = 1e-3) -> float:
    """``d/dt (H + psi)`` by central differences against ``-qd^T B qd`` with ``B = damping M``."""
    traj = rollout(damped_accel(fabric, psi, damping), (0.0, q0, qd0), dt, t_max,
                   record=lambda t, q, qd: {"E": fabric.hamiltonian(q, qd) + psi.value(q)})
    if traj.error:
        return np.inf
    total = traj.channel("E")
    rate = (total[2:] - total[:-2]) / (2 * dt)
    power = np.array([-damping * float(qd @ fabric.evaluate(q, qd, hamiltonian=False).M @ qd)
                      for q, qd in zip(traj.q[1:-1], traj.qd[1:-1])])
    return float(np.max(np.abs(rate - power)))


def check_damped_decrease() -> CheckResult:
    arm = default_arm()
    psi = soft_distance_field(GOAL, 2.0, 10.0).pullback(ee_taskmap(arm))
    res = damped_energy_residual(reach_fabric(), psi, 0.5, READY_Q, np.array([0.6, -0.4, 0.8]))
    return CheckResult("damped_energy_decrease", 1e-4, res)


def check_fd_energies(samples: int, seed: int, faults=()) -> CheckResult:
    energies = shipped_energies()
    if "energy_force" in faults:
        energies.append(("broken_force", _broken_energy(), box_sampler(2)))
    worst, who = 0.0, ""
    for label, E, sampler in energies:
        rng = np.random.default_rng(seed)
        for _ in range(samples):
            x, v = sampler(rng)
            err = finite_diff_check(E, x, v)
            if err > worst:
                worst, who = err, label
    return CheckResult("fd.energies", 1e-5, worst, who)


def check_fd_potentials(samples: int, seed: int) -> CheckResult:
    worst, who = 0.0, ""
    for label, psi, sampler in shipped_potentials():
        rng = np.random.default_rng(seed)
        for _ in range(samples):
            err = gradient_fd_check(psi, sampler(rng))
            if err > worst:
                worst, who = err, label
    return CheckResult("fd.potentials", 1e-5, worst, who)


def check_fd_taskmaps(samples: int, seed: int, faults=()) -> CheckResult:
    arm = default_arm()
    maps = shipped_taskmaps(arm)
    if "jacobian" in faults:
        maps.append(("broken_jacobian", _broken_taskmap(arm)))
    worst, who = 0.0, ""
    for label, tm in maps:
        rng = np.random.default_rng(seed)
        for _ in range(samples):
            q = rng.uniform(-np.pi, np.pi, tm.domain_dim)
            qd = rng.normal(size=tm.domain_dim)
            err = jacobian_fd_check(tm, q, qd)
            if err > worst:
                worst, who = err, label
    return CheckResult("fd.taskmaps", 1e-5, worst, who)


def invariant_suite(seed: int = 0, faults=(), samples: int = 1000) -> list[CheckResult]:
    """Run every invariant check; ``faults`` names components to break on purpose.

    Known faults are listed in :data:`FAULTS`.
    """
    unknown = set(faults) - set(FAULTS)
    if unknown:
        raise ValueError(f"unknown fault(s) {sorted(unknown)}; expected some of {FAULTS}")
    results = [
        check_generators(samples, seed, faults),
        check_energies_finsler(samples, seed),
        *check_projection(samples, seed),
        check_energization_coefficient(min(samples, 200), seed),
        check_fd_energies(samples, seed, faults),
        check_fd_potentials(samples, seed),
        check_fd_taskmaps(samples, seed, faults),
        check_conservation(),
        check_path_consistency(),
        check_damped_decrease(),
    ]
    return results


def report_dict(results: list[CheckResult]) -> dict:
    """JSON-ready form of a suite run."""
    return {
        "passed": all(r.passed for r in results),
        "checks": [{"name": r.name, "tolerance": r.tolerance, "observed": r.observed, "passed": r.passed,
                    "detail": r.detail} for r in results],
    }


def format_report(results: list[CheckResult]) -> str:
    lines = [r.line() for r in results]
    failed = sum(not r.passed for r in results)
    lines.append(f"{len(results) - failed}/{len(results)} checks passed")
    return "\n".join(lines)
