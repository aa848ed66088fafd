"""Command line front end: ``optfabrics run | demo | check | plot``.

Exit codes: 0 success, 1 invalid input, 2 a rollout failed or did not
converge, 3 an invariant check failed.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .checks import FAULTS, format_report, invariant_suite, report_dict
from .plotting import emit_plot_data
from .runner import load_trajectory_csv, run_scenario
from .scenario import Scenario, ScenarioError, load_scenario, shipped_scenario_path

EXIT_OK, EXIT_INVALID, EXIT_ROLLOUT, EXIT_INVARIANT = 0, 1, 2, 3
DEMOS = ("reach", "redundancy", "shaping")

log = logging.getLogger("optfabrics")


def _floor_height(s: Scenario):
    for t in s.terms:
        if t.kind == "lift" and t.enabled:
            return t.params.floor_height
    return None


def _apply_overrides(s: Scenario, dt=None, seed=None) -> Scenario:
    changes = {}
    if dt is not None:
        if not dt > 0:
            raise ScenarioError("--dt", f"must be positive, got {dt}")
        changes["dt"] = dt
    if seed is not None:
        changes["seed"] = seed
    return s.with_sim(**changes) if changes else s


def _report_episodes(result: dict) -> None:
    for i, ep in enumerate(result["summary"]["episodes"]):
        status = "converged" if ep["converged"] else "NOT converged"
        if ep["error"]:
            status = f"failed: {ep['error']}"
        log.info("episode %d goal=%s %s kkt=%.2e ee_error=%s", i, ep["goal"], status, ep["kkt_residual"],
                 "n/a" if ep["ee_error"] is None else f"{ep['ee_error']:.2e}")


def _plots(s: Scenario, out: Path) -> list[str]:
    written = []
    floor = _floor_height(s)
    for i, goal in enumerate(s.goals):
        csv_path = out / f"episode_{i}.csv"
        if not csv_path.exists():
            continue
        svg, ee = emit_plot_data(load_trajectory_csv(csv_path), s.arm, out / f"episode_{i}.svg",
                                 goal=goal, floor_y=floor)
        written += [str(svg), str(ee)]
    return written


def cmd_run(args) -> int:
    s = _apply_overrides(load_scenario(args.scenario), args.dt, args.seed)
    result = run_scenario(s, args.out)
    _report_episodes(result)
    log.info("wrote %d files to %s in %.1f s", len(result["files"]), args.out, result["elapsed"])
    return EXIT_OK if result["ok"] else EXIT_ROLLOUT


def _distance_to_default(s: Scenario, final_q) -> float:
    q0 = next(t.params.q0 for t in s.terms if t.kind == "default_config")
    return float(np.linalg.norm(np.asarray(final_q) - np.asarray(q0)))


def cmd_demo(args) -> int:
    out = Path(args.out or f"demo_{args.name}")
    if args.name != "redundancy":
        s = load_scenario(shipped_scenario_path(args.name))
        result = run_scenario(s, out)
        _report_episodes(result)
        files = _plots(s, out)
        log.info("wrote %d files to %s", len(result["files"]) + len(files), out)
        return EXIT_OK if result["ok"] else EXIT_ROLLOUT

    # the same goals with and without the default-configuration term
    with_s = load_scenario(shipped_scenario_path("reach"))
    without_s = load_scenario(shipped_scenario_path("redundancy"))
    ok = True
    finals = {}
    for label, s in (("with_redundancy", with_s), ("without_redundancy", without_s)):
        result = run_scenario(s, out / label)
        _plots(s, out / label)
        ok = ok and result["ok"]
        finals[label] = [ep["final_q"] for ep in result["summary"]["episodes"]]
    rows = []
    for i, goal in enumerate(with_s.goals):
        d_with = _distance_to_default(with_s, finals["with_redundancy"][i])
        d_without = _distance_to_default(with_s, finals["without_redundancy"][i])
        rows.append({"goal": list(goal), "distance_with": d_with, "distance_without": d_without,
                     "closer_with_redundancy": d_with < d_without})
        log.info("episode %d |q - q0| with %.4f without %.4f", i, d_with, d_without)
    (out / "comparison.json").write_text(json.dumps({"episodes": rows}, indent=2) + "\n")
    return EXIT_OK if ok else EXIT_ROLLOUT


def cmd_check(args) -> int:
    results = invariant_suite(args.seed, tuple(args.inject_fault or ()), args.samples)
    print(format_report(results))
    if args.json:
        Path(args.json).write_text(json.dumps(report_dict(results), indent=2) + "\n")
    return EXIT_OK if all(r.passed for r in results) else EXIT_INVARIANT


def cmd_plot(args) -> int:
    s = load_scenario(args.arm)
    cols = load_trajectory_csv(args.trajectory)
    missing = [c for c in [f"q{i}" for i in range(s.arm.n_joints)] if c not in cols]
    if missing:
        raise ScenarioError(str(args.trajectory), f"missing joint columns {missing} for this arm")
    goal = None
    if args.episode is not None:
        if not 0 <= args.episode < len(s.goals):
            raise ScenarioError("--episode", f"scenario has {len(s.goals)} goals")
        goal = s.goals[args.episode]
    svg, ee = emit_plot_data(cols, s.arm, args.out, args.snapshots, goal, _floor_height(s))
    log.info("wrote %s and %s", svg, ee)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="optfabrics", description="Fabric-based motion generation for planar arms.")
    p.add_argument("-q", "--quiet", action="store_true", help="only print errors")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario file")
    r.add_argument("scenario", type=Path)
    r.add_argument("--out", type=Path, required=True, help="output directory")
    r.add_argument("--dt", type=float, help="override the integration step")
    r.add_argument("--seed", type=int, help="override the scenario seed")
    r.set_defaults(func=cmd_run)

    d = sub.add_parser("demo", help="run a shipped demo and draw its episodes")
    d.add_argument("name", choices=DEMOS)
    d.add_argument("--out", type=Path, help="output directory (default demo_<name>)")
    d.set_defaults(func=cmd_demo)

    c = sub.add_parser("check", help="run the invariant suite")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--samples", type=int, default=1000, help="random samples per sampled check")
    c.add_argument("--inject-fault", action="append", choices=FAULTS,
                   help="break a component on purpose (repeatable)")
    c.add_argument("--json", type=Path, help="also write the report as JSON")
    c.set_defaults(func=cmd_check)

    pl = sub.add_parser("plot", help="draw arm snapshots from a trajectory CSV")
    pl.add_argument("trajectory", type=Path)
    pl.add_argument("--arm", type=Path, required=True, help="scenario file describing the arm")
    pl.add_argument("--out", type=Path, required=True, help="SVG path")
    pl.add_argument("--snapshots", type=int, default=12)
    pl.add_argument("--episode", type=int, help="mark this episode's goal")
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO, format="%(message)s")
    try:
        return args.func(args)
    except (ScenarioError, FileNotFoundError, ValueError) as exc:
        log.error("error: %s", exc)
        return EXIT_INVALID
    except Exception as exc:  # a rollout or IO failure outside per-episode handling
        log.error("runtime failure: %s: %s", type(exc).__name__, exc)
        return EXIT_ROLLOUT


if __name__ == "__main__":
    sys.exit(main())
