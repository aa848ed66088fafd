import csv
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from optfabrics.arm import ee_position
from optfabrics.plotting import EE_COLUMNS, emit_plot_data, snapshot_indices
from optfabrics.simulate import rollout

SVG = "{http://www.w3.org/2000/svg}"


@pytest.fixture
def traj():
    # a slow joint-space sweep with end-effector channels left for the plotter to compute
    return rollout(lambda t, q, qd: np.zeros(3), (0.0, [0.0, 0.5, -0.5], [0.2, -0.1, 0.3]), 0.1, 3.0)


def arm_polylines(svg_path):
    root = ET.parse(svg_path).getroot()
    return [p for p in root.iter(f"{SVG}polyline") if p.get("stroke-opacity") is not None]


def test_snapshot_indices():
    assert snapshot_indices(1) == [0]
    assert snapshot_indices(100, 12)[0] == 0 and snapshot_indices(100, 12)[-1] == 99
    assert len(snapshot_indices(100, 12)) == 12
    assert snapshot_indices(5, 12) == [0, 1, 2, 3, 4]
    with pytest.raises(ValueError):
        snapshot_indices(0)


def test_svg_well_formed_with_opacity_ramp(arm3, traj, tmp_path):
    svg, ee = emit_plot_data(traj, arm3, tmp_path / "sweep.svg", goal=(1.0, 1.0), floor_y=0.0)
    lines = arm_polylines(svg)
    assert len(lines) == 12
    opacity = [float(p.get("stroke-opacity")) for p in lines]
    assert opacity == sorted(opacity)
    assert opacity[0] < 0.5 < opacity[-1] == 1.0
    # each snapshot draws base, three joints and the end effector
    assert all(len(p.get("points").split()) == 4 for p in lines)


def test_single_row_gives_one_snapshot(arm3, tmp_path):
    one = rollout(lambda t, q, qd: np.zeros(3), (0.0, [0.1, 0.2, 0.3], [0.0, 0.0, 0.0]), 0.1, 1.0,
                  stop=lambda t, q, qd: True)
    svg, _ = emit_plot_data(one, arm3, tmp_path / "one.svg")
    assert len(arm_polylines(svg)) == 1


def test_ee_csv_header(arm3, traj, tmp_path):
    _, ee = emit_plot_data(traj, arm3, tmp_path / "sweep.svg")
    with open(ee) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == EE_COLUMNS == ["t", "ee_x", "ee_y", "H_fabric", "H_exec", "psi", "grad_norm"]
    assert len(rows) == len(traj) + 1
    start = ee_position(arm3, traj.q[0])
    assert [float(v) for v in rows[1][1:3]] == pytest.approx(start)
    assert rows[1][3] == "nan"
