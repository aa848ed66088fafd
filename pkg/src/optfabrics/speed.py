"""Execution-energy speed regulation on top of an energized fabric.

The controlled system is

    qdd = -M^-1 dpsi + pi0 + alpha_reg qd

where ``pi0`` is the raw root generator policy. All coefficients here are
*additive*: ``qdd = pi + alpha qd`` keeps an energy constant for
``alpha = -v'(M pi + f_e) / v'M v``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .energization import VELOCITY_GUARD
from .energy import EnergyLagrangian, euclidean_energy
from .spec import Potential, _vec, solve_metric

DAMPING_MODES = ("regulated", "execution_only", "conserve_fabric")


@dataclass(frozen=True)
class SpeedControlConfig:
    """Speed-control settings.

    ``damping_mode`` selects how ``beta_reg`` is formed. ``"regulated"`` is
    the production rule. ``"execution_only"`` drops the stability term
    ``max(0, alpha_ex - alpha_fabric)`` and ``"conserve_fabric"`` uses
    ``beta = alpha_ex - alpha_fabric`` exactly; both exist for testing.
    """

    eta: float = 0.0
    B_base: float = 0.5
    B_switch: float = 2.0
    switch_radius: float = 0.2
    boost_target: float = 1.0
    boost_gain: float = 0.0
    boost_window: float = 0.0
    execution_energy: EnergyLagrangian | None = None
    switch_fn: Callable | None = field(default=None, compare=False)
    damping_mode: str = "regulated"

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must lie in [0, 1], got {self.eta}")
        if not self.B_base > 0:
            raise ValueError("B_base must be positive")
        if not self.B_switch >= 0:
            raise ValueError("B_switch must be nonnegative")
        if not self.switch_radius > 0:
            raise ValueError("switch_radius must be positive")
        if not self.boost_target > 0 or self.boost_gain < 0 or self.boost_window < 0:
            raise ValueError("boost needs a positive target and nonnegative gain and window")
        if self.damping_mode not in DAMPING_MODES:
            raise ValueError(f"damping_mode must be one of {DAMPING_MODES}")


def gradient_switch(psi: Potential, radius: float):
    """``s(x) = 1 - tanh(|dpsi(x)| / radius)``: 1 at the minimizer, 0 far away."""

    def s(x):
        return float(np.clip(1.0 - np.tanh(np.linalg.norm(psi.gradient(x)) / radius), 0.0, 1.0))

    return s


def additive_alpha(pi, M, f_e, v) -> float:
    """``alpha`` such that ``qdd = pi + alpha v`` conserves the energy ``(M, f_e)``.

    Returns 0 at (numerically) zero velocity.
    """
    if np.linalg.norm(v) < VELOCITY_GUARD:
        return 0.0
    s = float(v @ M @ v)
    if s == 0.0:
        return 0.0
    return -float(v @ (M @ pi + f_e)) / s


def _exec_terms(E_exec: EnergyLagrangian, x, v):
    return E_exec.mass(x, v), E_exec.force(x, v)


def execution_alphas(pi0, grad_term, E_fabric, E_exec: EnergyLagrangian, x, v):
    """``(alpha_ex0, alpha_ex_psi, alpha_fabric)``.

    ``grad_term`` is ``-M^-1 dpsi``. ``E_fabric`` is either an energy or an
    already-evaluated ``(M, f_e)`` pair. All three are zero when ``v = 0``.
    """
    v = _vec(v)
    pi0 = _vec(pi0, v.shape[0], "pi0")
    grad_term = _vec(grad_term, v.shape[0], "grad_term")
    M_ex, f_ex = _exec_terms(E_exec, x, v)
    if isinstance(E_fabric, EnergyLagrangian):
        M_f, f_f = E_fabric.mass(x, v), E_fabric.force(x, v)
    else:
        M_f, f_f = E_fabric
    return (additive_alpha(pi0, M_ex, f_ex, v),
            additive_alpha(pi0 + grad_term, M_ex, f_ex, v),
            additive_alpha(pi0, M_f, f_f, v))


def _switch(cfg: SpeedControlConfig, x) -> float:
    if cfg.switch_fn is None:
        return 0.0
    s = float(cfg.switch_fn(x))
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"switch function left [0, 1]: {s}")
    return s


def damping_coefficient(x, alpha_ex_eta: float, alpha_Le: float, cfg: SpeedControlConfig) -> float:
    """``beta_reg = s(x) B + B_base + max(0, alpha_ex_eta - alpha_fabric)``."""
    base = _switch(cfg, x) * cfg.B_switch + cfg.B_base
    if cfg.damping_mode == "execution_only":
        return base
    if cfg.damping_mode == "conserve_fabric":
        return alpha_ex_eta - alpha_Le
    return base + max(0.0, alpha_ex_eta - alpha_Le)


def boost_coefficient(x, v, t: float, cfg: SpeedControlConfig) -> float:
    """``-gain * max(0, target - |v|)`` inside the boost window, else 0; never positive."""
    if t >= cfg.boost_window or cfg.boost_gain == 0.0:
        return 0.0
    return -cfg.boost_gain * max(0.0, cfg.boost_target - float(np.linalg.norm(v)))


def controlled_acceleration(root, psi: Potential, cfg: SpeedControlConfig, x, v, t: float):
    """Speed-controlled acceleration and its diagnostics.

    ``root`` is a :class:`~optfabrics.fabric.FabricEval` (anything with
    ``M``, ``f_geom`` and ``f_energy``). The boost injects energy: it enters
    as ``alpha_reg = alpha_ex - beta - alpha_boost`` and, under the
    regulated rule, is capped so that ``alpha_reg <= alpha_fabric - B_base``.
    """
    x = _vec(x)
    v = _vec(v, x.shape[0], "velocity")
    M = root.M
    grad = psi.gradient(x)
    grad_term = -solve_metric(M, grad)
    pi0 = -solve_metric(M, root.f_geom)
    E_exec = cfg.execution_energy or euclidean_energy(x.shape[0])
    a0, apsi, aLe = execution_alphas(pi0, grad_term, (M, root.f_energy), E_exec, x, v)
    a_eta = cfg.eta * a0 + (1.0 - cfg.eta) * apsi
    beta = damping_coefficient(x, a_eta, aLe, cfg)
    boost = boost_coefficient(x, v, t, cfg)
    a_reg = a_eta - beta
    if boost < 0.0:
        a_reg = a_reg - boost
        if cfg.damping_mode == "regulated":
            a_reg = min(a_reg, aLe - cfg.B_base)
    qdd = grad_term + pi0 + a_reg * v
    diag = {
        "alpha_ex0": a0,
        "alpha_ex_psi": apsi,
        "alpha_le": aLe,
        "beta_reg": beta,
        "alpha_boost": boost,
        "alpha_reg": a_reg,
    }
    return qdd, diag


class SpeedController:
    """Bundles a fabric, a potential and a config into ``accel_fn(t, q, qd)``."""

    def __init__(self, fabric, psi: Potential, cfg: SpeedControlConfig):
        if cfg.switch_fn is None and cfg.B_switch > 0:
            cfg = replace(cfg, switch_fn=gradient_switch(psi, cfg.switch_radius))
        if cfg.execution_energy is None:
            cfg = replace(cfg, execution_energy=euclidean_energy(fabric.root_dim))
        self.fabric = fabric
        self.psi = psi
        self.cfg = cfg

    def __call__(self, t, q, qd):
        ev = self.fabric.evaluate(q, qd, hamiltonian=False)
        return controlled_acceleration(ev, self.psi, self.cfg, q, qd, t)
