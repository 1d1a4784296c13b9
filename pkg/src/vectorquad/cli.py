"""Command-line front end: run scenarios, emit logs/plot data, verify.

Artifacts per run directory: ``log.csv`` (full tick log), ``summary.json``
(schema-validated run summary) and ``plots/*.csv`` (tidy per-panel series:
position errors, rotation errors, joint angles, joint torques, rotor
thrusts). Exit status: 0 success, 1 runtime failure (machine-readable JSON
reason on stderr), 2 usage errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import jsonschema
import numpy as np

from . import config as config_mod
from .allocation import (AllocationError, AllocationWeights, allocate,
                         gravity_wrench)
from .model import RobotDescription, RobotState, forward_kinematics
from .scenarios import (SCENARIO_NAMES, SimLog, default_scenario,
                        run_scenario, summarize)

_PANELS = {
    "position_errors": ["err_x", "err_y", "err_z"],
    "rotation_errors": ["err_rx", "err_ry", "err_rz"],
    "joint_angles": [f"q{i}" for i in range(16)] + [f"qd{i}" for i in range(16)],
    "joint_torques": [f"tau{i}" for i in range(16)],
    "rotor_thrusts": [f"lam{i}" for i in range(8)] + [f"lam_cmd{i}" for i in range(8)],
}


def _write_plots(log: SimLog, out: Path) -> None:
    plots = out / "plots"
    plots.mkdir(parents=True, exist_ok=True)
    t = log.column("t")
    for name, cols in _PANELS.items():
        data = log.array(cols)
        with open(plots / f"{name}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t"] + cols)
            for i in range(len(t)):
                writer.writerow([t[i]] + list(data[i]))


def _write_summary(summary: dict, out: Path) -> dict:
    clean = config_mod.sanitize(summary)
    jsonschema.validate(clean, config_mod.summary_schema())
    with open(out / "summary.json", "w") as fh:
        json.dump(clean, fh, indent=2)
        fh.write("\n")
    return clean


def _fail(reason: str, **detail) -> int:
    print(json.dumps({"error": reason, **config_mod.sanitize(detail)}),
          file=sys.stderr)
    return 1


def _resolve_config(arg: str | None, default_name: str) -> Path | None:
    if arg is not None:
        return Path(arg)
    candidate = config_mod.config_dir() / default_name
    return candidate if candidate.is_file() else None


def _run_one(name: str, opts: dict, seed: int, out: Path) -> dict:
    robot_path = _resolve_config(opts.get("robot"), "robot.yaml")
    gains_path = _resolve_config(opts.get("gains"), "gains.yaml")
    desc = config_mod.load_robot(robot_path) if robot_path else RobotDescription()
    gains = config_mod.load_gains(gains_path) if gains_path else None

    scen = default_scenario(name)
    scen = replace(scen, seed=seed)
    if opts.get("duration") is not None:
        scen = replace(scen, duration=opts["duration"])
    if opts.get("feedback"):
        scen = replace(scen, gait=replace(scen.gait, feedback_planning=True))

    log = run_scenario(desc, scen, gains=gains)
    out.mkdir(parents=True, exist_ok=True)
    log.to_csv(out / "log.csv")
    _write_plots(log, out)
    return _write_summary(summarize(log, scen), out)


def _run_seed_job(payload: tuple) -> tuple[int, dict]:
    name, opts, seed, out = payload
    return seed, _run_one(name, opts, seed, Path(out))


def _cmd_scenario(name: str, args: argparse.Namespace) -> int:
    out = Path(args.out)
    opts = {k: v for k, v in vars(args).items() if k != "func"}
    if args.jobs > 1:
        seeds = [args.seed + k for k in range(args.jobs)]
        payloads = [(name, opts, s, str(out / f"seed_{s}")) for s in seeds]
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = dict(pool.map(_run_seed_job, payloads))
        bad = {s: r for s, r in results.items() if r["final_status"] != "ok"
               or r["infeasible_count"]}
        for s in seeds:
            r = results[s]
            print(f"seed {s}: {r['final_status']}, "
                  f"{r['infeasible_count']} infeasible events")
        if bad:
            return _fail("scenario failed", seeds={s: r["final_status"]
                                                  for s, r in bad.items()})
        return 0

    try:
        summary = _run_one(name, opts, args.seed, out)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"{name}: {summary['final_status']}, "
          f"rms error {summary['rms_error_m']} m, "
          f"{summary['infeasible_count']} infeasible events "
          f"-> {out / 'summary.json'}")
    if summary["final_status"] != "ok":
        return _fail("scenario did not finish", status=summary["final_status"],
                     scenario=name)
    if summary["infeasible_count"]:
        return _fail("allocation infeasibility events",
                     count=summary["infeasible_count"], scenario=name)
    return 0


def _cmd_verify_allocation(args: argparse.Namespace) -> int:
    robot_path = _resolve_config(args.robot, "robot.yaml")
    desc = config_mod.load_robot(robot_path) if robot_path else RobotDescription()
    rng = np.random.default_rng(args.seed)
    modes = [(), (0, 1, 2), (1, 2, 3), (0, 1, 3), (0, 2, 3), (0, 1, 2, 3)]
    worst = {"wrench": 0.0, "equilibrium": 0.0, "bounds": 0.0}
    times = []
    for case in range(args.cases):
        state = RobotState.rest(desc, height=0.5)
        state.joint_angles = rng.uniform(-np.pi / 3, np.pi / 3, desc.n_joints)
        frames = forward_kinematics(desc, state)
        contacts = modes[case % len(modes)]
        weights = (AllocationWeights(torque=0.0) if not contacts
                   else AllocationWeights())
        limit = None if not contacts else 1.5
        start = time.perf_counter()
        try:
            result = allocate(desc, frames, gravity_wrench(desc),
                              contact_legs=contacts, weights=weights,
                              torque_limit=limit, refine=False)
        except AllocationError as exc:
            return _fail("allocation infeasible", case=case,
                         contacts=list(contacts), detail=str(exc))
        times.append(time.perf_counter() - start)
        qp = result.qp
        worst["wrench"] = max(worst["wrench"], qp.wrench_residual)
        worst["equilibrium"] = max(worst["equilibrium"],
                                   qp.equilibrium_residual)
        box = desc.max_thrust / np.sqrt(3.0)
        over = max(float(np.max(np.abs(result.link_forces))) - box, 0.0)
        tau_limit = limit if limit is not None else desc.max_joint_torque
        over = max(over,
                   float(np.max(np.abs(result.joint_torques))) - tau_limit)
        if len(result.contact_forces):
            over = max(over, float(-np.min(result.contact_forces[:, 2])))
        worst["bounds"] = max(worst["bounds"], over)
    ok = (worst["wrench"] < 1e-6 and worst["equilibrium"] < 1e-6
          and worst["bounds"] < 1e-9)
    print(f"{args.cases} cases: wrench residual {worst['wrench']:.2e} N, "
          f"equilibrium residual {worst['equilibrium']:.2e} Nm, "
          f"bound overshoot {worst['bounds']:.2e}")
    print(f"solve time mean {np.mean(times) * 1e3:.2f} ms, "
          f"max {np.max(times) * 1e3:.2f} ms")
    if not ok:
        return _fail("allocation residuals above tolerance", **worst)
    print("all residuals within tolerance")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vectorquad",
        description="Thrust-assisted quadruped scenario runner")
    sub = parser.add_subparsers(dest="command", required=True)

    for name in SCENARIO_NAMES:
        p = sub.add_parser(name, help=f"run the {name} scenario")
        p.add_argument("--robot", help="robot description YAML")
        p.add_argument("--gains", help="control gains YAML")
        p.add_argument("--duration", type=float, default=None,
                       help="override scenario duration (s)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=f"out/{name}",
                       help="output directory (default out/<scenario>)")
        p.add_argument("--jobs", type=int, default=1,
                       help="fan out N consecutive seeds in parallel")
        if name in ("walk", "hybrid"):
            p.add_argument("--feedback", action="store_true",
                           help="enable feedback gait planning")
        p.set_defaults(func=lambda a, n=name: _cmd_scenario(n, a))

    v = sub.add_parser("verify-allocation",
                       help="random-pose allocation residual check")
    v.add_argument("--cases", type=int, default=1000)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--robot", help="robot description YAML")
    v.set_defaults(func=_cmd_verify_allocation)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
