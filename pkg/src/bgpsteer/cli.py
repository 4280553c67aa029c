"""Command-line front end: simulate, plan and diff scenario runs.

Exit codes:
  0  success (converged / plan found / no diff)
  1  input error (unreadable file, parse error, bad objectives)
  2  no fixed point (oscillation)
  3  objectives structurally infeasible (witnesses printed)
  4  bounded search exhausted without a plan
  5  diff found moved flows

All reports are sorted and timestamp-free, so repeated runs on identical
inputs are byte-identical.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .engine import OscillationError, propagate_to_convergence
from .flows import ingress_map
from .planner import (
    Budget,
    Exhausted,
    Infeasible,
    Plan,
    PlanningError,
    evaluate_plan,
    plan_inbound_te,
)
from .scenario import Scenario, ScenarioError, parse_scenario
from .topology import Prefix, TopologyError

STATE_FILE = "state.txt"
INGRESS_FILE = "ingress.csv"
PLAN_FILE = "plan.txt"
PREDICTED_FILE = "predicted_ingress.csv"


def _load(path: str) -> Scenario:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc}", 0, 0) from exc
    return parse_scenario(text)


def _out_dir(args) -> Path:
    out = Path(args.out) if args.out else Path(str(args.scenario) + ".out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _merged_ingress_csv(state, scenario: Scenario) -> str:
    rows: list[tuple[int, Prefix, str]] = []
    for dest in sorted(scenario.topology.originations):
        if not scenario.topology.originated_by(dest):
            continue
        m = ingress_map(state, scenario.topology, dest)
        for (src, prefix), link in m.entries.items():
            rows.append((src, prefix, link))
    lines = ["src_asn,dst_prefix,link"]
    for src, prefix, link in sorted(rows, key=lambda r: (r[0], r[1].sort_key())):
        lines.append(f"{src},{prefix},{link}")
    return "\n".join(lines) + "\n"


def cmd_simulate(args) -> int:
    try:
        scenario = _load(args.scenario)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out = _out_dir(args)
    trace = None
    if args.trace:
        def trace(round_no: int, dump: str) -> None:
            sys.stderr.write(f"--- round {round_no} ---\n{dump}")
    try:
        state = propagate_to_convergence(
            scenario.topology,
            scenario.te_config,
            max_rounds=args.max_rounds,
            trace=trace,
        )
    except OscillationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (TopologyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    (out / STATE_FILE).write_text(state.dump(), encoding="utf-8")
    (out / INGRESS_FILE).write_text(_merged_ingress_csv(state, scenario), encoding="utf-8")
    print(f"converged in {state.rounds_used} rounds; reports in {out}")
    return 0


def _plan_report(scenario: Scenario, dest: int, plan: Plan, report) -> str:
    lines = ["status found"]
    if plan.lp_constraint_violated:
        lines.append("warning LP-constraint violated - outcome not guaranteed")
    for action in plan.actions:
        lines.append(f"action {action}")
    for o, ok in zip(scenario.objectives, report.satisfied):
        src = "*" if o.flow.src_asn is None else str(o.flow.src_asn)
        lines.append(
            f"objective {o.flow.dst_asn} {src} {o.flow.dst_prefix} {o.required_link} "
            f"satisfied={'yes' if ok else 'no'}"
        )
    for src, prefix, old, new in plan.side_effects:
        lines.append(f"side-effect {src} {prefix} {old} {new}")
    lines.append(f"rounds {report.rounds_used}")
    return "\n".join(lines) + "\n"


def cmd_plan(args) -> int:
    try:
        scenario = _load(args.scenario)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if not scenario.objectives:
        print("error: scenario contains no objectives", file=sys.stderr)
        return 1
    dests = {o.flow.dst_asn for o in scenario.objectives}
    if len(dests) != 1:
        print("error: objectives target more than one destination AS", file=sys.stderr)
        return 1
    dest = dests.pop()
    out = _out_dir(args)
    budget = Budget(max_actions=args.budget_actions)
    try:
        result = plan_inbound_te(
            scenario.topology,
            dest,
            scenario.objectives,
            budget,
            scenario.te_config.lp_overrides,
        )
    except OscillationError as exc:  # the baseline itself has no fixed point
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (PlanningError, TopologyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if isinstance(result, Infeasible):
        lines = ["status infeasible"]
        lines += [str(w) for w in result.witnesses]
        text = "\n".join(lines) + "\n"
        (out / PLAN_FILE).write_text(text, encoding="utf-8")
        print(text, end="")
        return 3
    if isinstance(result, Exhausted):
        text = f"status exhausted tried={result.candidates_tried} max-actions={result.max_actions}\n"
        (out / PLAN_FILE).write_text(text, encoding="utf-8")
        print(text, end="")
        return 4
    report = evaluate_plan(
        scenario.topology, dest, result, scenario.objectives, scenario.te_config.lp_overrides
    )
    text = _plan_report(scenario, dest, result, report)
    (out / PLAN_FILE).write_text(text, encoding="utf-8")
    (out / PREDICTED_FILE).write_text(result.predicted_map.to_csv(), encoding="utf-8")
    print(text, end="")
    return 0


def _read_csv(path: Path) -> dict[tuple[str, str], str]:
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc}", 0, 0) from exc
    if not lines or lines[0] != "src_asn,dst_prefix,link":
        raise ScenarioError(f"{path} is not an ingress CSV", 0, 0)
    entries: dict[tuple[str, str], str] = {}
    for line in lines[1:]:
        if not line:
            continue
        src, prefix, link = line.split(",")
        entries[(src, prefix)] = link
    return entries


def cmd_diff(args) -> int:
    try:
        base = _read_csv(Path(args.baseline) / INGRESS_FILE)
        new = _read_csv(Path(args.comparison) / INGRESS_FILE)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if set(base) != set(new):
        print("error: ingress CSVs cover different scenario keys", file=sys.stderr)
        return 1
    moves = []
    for key in sorted(base, key=lambda k: (int(k[0]), k[1])):
        if base[key] != new[key]:
            moves.append(f"{key[0]},{key[1]},{base[key]},{new[key]}")
    for line in moves:
        print(line)
    return 5 if moves else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bgpsteer",
        description="AS-level BGP simulation and community-driven inbound traffic engineering",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a scenario to its converged state")
    sim.add_argument("--scenario", required=True, help="scenario file path")
    sim.add_argument("--out", help="report directory (default: <scenario>.out)")
    sim.add_argument("--max-rounds", type=int, default=None, help="override the round bound")
    sim.add_argument("--trace", action="store_true", help="dump per-round RIBs to stderr")
    sim.set_defaults(func=cmd_simulate)

    plan = sub.add_parser("plan", help="search community/advertisement actions for the objectives")
    plan.add_argument("--scenario", required=True, help="scenario file with objective records")
    plan.add_argument("--out", help="report directory (default: <scenario>.out)")
    plan.add_argument("--budget-actions", type=int, default=3, help="max actions per plan")
    plan.set_defaults(func=cmd_plan)

    diff = sub.add_parser("diff", help="compare the ingress CSVs of two run directories")
    diff.add_argument("baseline", help="baseline run directory")
    diff.add_argument("comparison", help="comparison run directory")
    diff.set_defaults(func=cmd_diff)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
