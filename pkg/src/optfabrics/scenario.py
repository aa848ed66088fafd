"""JSON scenario files.

Schema (all lengths in meters, angles in radians)::

    {
      "name": "reach",
      "arm": {"link_lengths": [...], "joint_lower": [...], "joint_upper": [...],
              "base_xy": [0, 0], "base_angle": 0},
      "initial_q": [...],
      "terms": [{"kind": "attractor", "space": "ee", "params": {...}}, ...],
      "goals": [[x, y], ...],
      "potential": {"kind": "soft_distance", "space": "ee", "params": {"k": 2, "alpha_psi": 10}},
      "speed_control": {"eta": 0.5, "B_base": 0.5, ...},
      "sim": {"dt": 0.01, "t_max": 15, "seed": 0}
    }

Joint angles are relative, counterclockwise positive. ``space`` is ``"ee"``
(end-effector position), ``"root"`` (joint angles) or ``"joints"`` (every
joint-limit distance; only for ``joint_limit`` terms). Terms of kind
``attractor`` and ``approach`` follow the current episode goal.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .arm import ArmModel
from .speed import DAMPING_MODES
from .terms import METRIC_KINDS, TermParams

TERM_SPACES = {
    "attractor": ("ee",),
    "approach": ("ee",),
    "lift": ("ee",),
    "joint_limit": ("joints",),
    "default_config": ("root",),
    "base_metric": ("root",),
}
POTENTIAL_KINDS = ("soft_distance",)
SPEED_FIELDS = {"eta", "B_base", "B_switch", "switch_radius", "boost_target", "boost_gain",
                "boost_window", "damping_mode"}
TERM_PARAM_FIELDS = {f.name for f in fields(TermParams)}


class ScenarioError(ValueError):
    """Invalid scenario; ``field`` names the first offending entry."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class TermSpec:
    kind: str
    space: str
    params: TermParams
    enabled: bool = True


@dataclass(frozen=True)
class Scenario:
    name: str
    arm: ArmModel
    initial_q: tuple
    terms: tuple
    goals: tuple
    potential: dict
    speed_control: dict
    dt: float
    t_max: float
    seed: int = 0
    source: str | None = field(default=None, compare=False)

    def with_sim(self, **changes) -> "Scenario":
        from dataclasses import replace

        return replace(self, **changes)

    def without(self, kind: str) -> "Scenario":
        """A copy with every term of ``kind`` removed."""
        from dataclasses import replace

        return replace(self, terms=tuple(t for t in self.terms if t.kind != kind))


def _require(d: dict, key: str, path: str):
    if not isinstance(d, dict):
        raise ScenarioError(path, "expected an object")
    if key not in d:
        raise ScenarioError(f"{path}.{key}" if path else key, "missing")
    return d[key]


def _number(val, path: str, positive: bool = False, nonneg: bool = False) -> float:
    if isinstance(val, bool) or not isinstance(val, (int, float)) or not np.isfinite(val):
        raise ScenarioError(path, f"expected a finite number, got {val!r}")
    if positive and not val > 0:
        raise ScenarioError(path, f"must be positive, got {val!r}")
    if nonneg and val < 0:
        raise ScenarioError(path, f"must be nonnegative, got {val!r}")
    return float(val)


def _vector(val, path: str, length: int | None = None) -> tuple:
    if not isinstance(val, (list, tuple)):
        raise ScenarioError(path, "expected a list of numbers")
    out = tuple(_number(v, f"{path}[{i}]") for i, v in enumerate(val))
    if length is not None and len(out) != length:
        raise ScenarioError(path, f"expected {length} entries, got {len(out)}")
    return out


def _arm(d, path="arm") -> ArmModel:
    lengths = _vector(_require(d, "link_lengths", path), f"{path}.link_lengths")
    if not lengths:
        raise ScenarioError(f"{path}.link_lengths", "needs at least one link")
    for i, l in enumerate(lengths):
        if l <= 0:
            raise ScenarioError(f"{path}.link_lengths[{i}]", f"link length must be positive, got {l}")
    n = len(lengths)
    lower = _vector(d.get("joint_lower", [-np.pi] * n), f"{path}.joint_lower", n)
    upper = _vector(d.get("joint_upper", [np.pi] * n), f"{path}.joint_upper", n)
    for i, (lo, hi) in enumerate(zip(lower, upper)):
        if lo >= hi:
            raise ScenarioError(f"{path}.joint_lower[{i}]", "must be below joint_upper")
    base = _vector(d.get("base_xy", [0.0, 0.0]), f"{path}.base_xy", 2)
    angle = _number(d.get("base_angle", 0.0), f"{path}.base_angle")
    return ArmModel(lengths, lower, upper, base, angle)


def _params(d, path: str, n_joints: int) -> TermParams:
    if not isinstance(d, dict):
        raise ScenarioError(path, "expected an object")
    kwargs = {}
    for key, val in d.items():
        p = f"{path}.{key}"
        if key not in TERM_PARAM_FIELDS:
            raise ScenarioError(p, "unknown parameter")
        if key == "metric":
            if val not in METRIC_KINDS:
                raise ScenarioError(p, f"must be one of {METRIC_KINDS}")
            kwargs[key] = val
        elif key in ("goal", "floor_normal"):
            kwargs[key] = _vector(val, p, 2)
        elif key == "q0":
            kwargs[key] = _vector(val, p, n_joints)
        else:
            kwargs[key] = _number(val, p)
    try:
        return TermParams(**kwargs)
    except ValueError as exc:
        raise ScenarioError(path, str(exc)) from None


def _term(d, path: str, n_joints: int) -> TermSpec:
    kind = _require(d, "kind", path)
    if kind not in TERM_SPACES:
        raise ScenarioError(f"{path}.kind", f"unknown term kind {kind!r}; expected one of {sorted(TERM_SPACES)}")
    space = d.get("space", TERM_SPACES[kind][0])
    if space not in TERM_SPACES[kind]:
        raise ScenarioError(f"{path}.space", f"term {kind!r} lives in {TERM_SPACES[kind]}, not {space!r}")
    params = _params(d.get("params", {}), f"{path}.params", n_joints)
    if kind == "default_config" and params.q0 is None:
        raise ScenarioError(f"{path}.params.q0", "missing")
    enabled = d.get("enabled", True)
    if not isinstance(enabled, bool):
        raise ScenarioError(f"{path}.enabled", "expected true or false")
    return TermSpec(kind, space, params, enabled)


def scenario_from_dict(d: dict, source: str | None = None) -> Scenario:
    if not isinstance(d, dict):
        raise ScenarioError("<root>", "expected a JSON object")
    arm = _arm(_require(d, "arm", ""))
    n = arm.n_joints
    q_init = _vector(d.get("initial_q", [0.0] * n), "initial_q", n)
    for i, q in enumerate(q_init):
        if not arm.joint_lower[i] < q < arm.joint_upper[i]:
            raise ScenarioError(f"initial_q[{i}]", "must lie strictly inside the joint limits")

    terms_raw = _require(d, "terms", "")
    if not isinstance(terms_raw, list) or not terms_raw:
        raise ScenarioError("terms", "needs at least one term")
    terms = tuple(_term(t, f"terms[{i}]", n) for i, t in enumerate(terms_raw))

    goals_raw = _require(d, "goals", "")
    if not isinstance(goals_raw, list) or not goals_raw:
        raise ScenarioError("goals", "needs at least one goal")
    goals = tuple(_vector(g, f"goals[{i}]", 2) for i, g in enumerate(goals_raw))

    pot = _require(d, "potential", "")
    kind = _require(pot, "kind", "potential")
    if kind not in POTENTIAL_KINDS:
        raise ScenarioError("potential.kind", f"unknown potential {kind!r}")
    if pot.get("space", "ee") != "ee":
        raise ScenarioError("potential.space", "only the end-effector space is supported")
    pparams = pot.get("params", {})
    potential = {
        "kind": kind,
        "k": _number(pparams.get("k", 1.0), "potential.params.k", positive=True),
        "alpha_psi": _number(pparams.get("alpha_psi", 10.0), "potential.params.alpha_psi", positive=True),
    }

    sc = d.get("speed_control", {})
    if not isinstance(sc, dict):
        raise ScenarioError("speed_control", "expected an object")
    speed = {}
    for key, val in sc.items():
        if key not in SPEED_FIELDS:
            raise ScenarioError(f"speed_control.{key}", "unknown field")
        if key == "damping_mode":
            if val not in DAMPING_MODES:
                raise ScenarioError("speed_control.damping_mode", f"must be one of {DAMPING_MODES}")
            speed[key] = val
        else:
            speed[key] = _number(val, f"speed_control.{key}")
    if "eta" in speed and not 0 <= speed["eta"] <= 1:
        raise ScenarioError("speed_control.eta", "must lie in [0, 1]")
    if "B_base" in speed and not speed["B_base"] > 0:
        raise ScenarioError("speed_control.B_base", "must be positive")

    sim = _require(d, "sim", "")
    dt = _number(_require(sim, "dt", "sim"), "sim.dt", positive=True)
    t_max = _number(_require(sim, "t_max", "sim"), "sim.t_max", positive=True)
    seed = sim.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ScenarioError("sim.seed", "expected an integer")
    return Scenario(str(d.get("name", "scenario")), arm, q_init, terms, goals, potential, speed,
                    dt, t_max, seed, source)


def load_scenario(path) -> Scenario:
    """Read and validate a scenario file.

    Raises ``FileNotFoundError`` for a missing file and :class:`ScenarioError`
    (naming the line or field) for malformed content.
    """
    path = Path(path)
    text = path.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"line {exc.lineno} column {exc.colno}", exc.msg) from None
    return scenario_from_dict(data, str(path))


def shipped_scenario_path(name: str) -> Path:
    path = Path(__file__).parent / "scenarios" / f"{name}.json"
    if not path.exists():
        raise FileNotFoundError(f"no shipped scenario named {name!r}")
    return path
