import copy
import json

import pytest

from optfabrics.scenario import ScenarioError, load_scenario, scenario_from_dict, shipped_scenario_path


@pytest.fixture
def raw():
    return json.loads(shipped_scenario_path("reach").read_text())


@pytest.mark.parametrize("name", ["reach", "redundancy", "shaping"])
def test_shipped_files_load(name):
    s = load_scenario(shipped_scenario_path(name))
    assert s.arm.n_joints == 3
    assert s.goals


def test_reach_contents(reach_scenario):
    assert reach_scenario.name == "reach"
    assert len(reach_scenario.goals) == 5
    assert [t.kind for t in reach_scenario.terms] == ["attractor", "joint_limit", "default_config", "base_metric"]
    assert reach_scenario.dt == 0.01


def test_redundancy_only_disables_default_config(reach_scenario):
    red = load_scenario(shipped_scenario_path("redundancy"))
    assert [t.kind for t in red.terms] == [t.kind for t in reach_scenario.terms]
    assert [t.kind for t in red.terms if not t.enabled] == ["default_config"]
    assert red.goals == reach_scenario.goals


def _error(d):
    with pytest.raises(ScenarioError) as info:
        scenario_from_dict(d)
    return info.value


def test_missing_dt_named(raw):
    del raw["sim"]["dt"]
    assert _error(raw).field == "sim.dt"


def test_negative_link_length_named(raw):
    raw["arm"]["link_lengths"][1] = -1.0
    assert _error(raw).field == "arm.link_lengths[1]"


@pytest.mark.parametrize("mutate,field", [
    (lambda d: d["sim"].update(t_max=0), "sim.t_max"),
    (lambda d: d.update(goals=[]), "goals"),
    (lambda d: d.update(terms=[]), "terms"),
    (lambda d: d["terms"][0].update(kind="teleport"), "terms[0].kind"),
    (lambda d: d["terms"][0].update(space="root"), "terms[0].space"),
    (lambda d: d["terms"][0]["params"].update(k=-2), "terms[0].params"),
    (lambda d: d["terms"][0]["params"].update(gain=1), "terms[0].params.gain"),
    (lambda d: d["terms"][2]["params"].update(q0=[0, 0]), "terms[2].params.q0"),
    (lambda d: d["speed_control"].update(eta=2), "speed_control.eta"),
    (lambda d: d["speed_control"].update(turbo=1), "speed_control.turbo"),
    (lambda d: d.update(initial_q=[4.0, 0, 0]), "initial_q[0]"),
    (lambda d: d["potential"].update(kind="coulomb"), "potential.kind"),
    (lambda d: d["sim"].update(seed="zero"), "sim.seed"),
    (lambda d: d["goals"][1].append(3.0), "goals[1]"),
])
def test_validation_names_field(raw, mutate, field):
    d = copy.deepcopy(raw)
    mutate(d)
    assert _error(d).field == field


def test_malformed_json_names_line(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "name": "x",\n  "arm": {,\n}\n')
    with pytest.raises(ScenarioError, match="line 3"):
        load_scenario(path)


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_scenario(tmp_path / "absent.json")
    with pytest.raises(FileNotFoundError):
        shipped_scenario_path("absent")


def test_with_sim_and_without(reach_scenario):
    s = reach_scenario.with_sim(dt=0.005, seed=3)
    assert (s.dt, s.seed, s.t_max) == (0.005, 3, reach_scenario.t_max)
    assert all(t.kind != "joint_limit" for t in reach_scenario.without("joint_limit").terms)
