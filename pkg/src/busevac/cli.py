"""Command-line front end.

Subcommands: generate, solve, validate, report, oracle.  Exit codes:
0 success/feasible, 1 usage or input error, 2 infeasible model or invalid
plan, 3 solver hit the time limit without finding any plan.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

from . import planio, scenario
from .bnb import SolverConfig, format_gap
from .formulation import check_plan, compute_doses, extract_routes
from .instance import InstanceError
from .linearize import MODES
from .mps import export_mps
from .oracle import SearchSpaceError, brute_force_oracle
from .pipeline import solve_instance

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2
EXIT_NO_INCUMBENT = 3

_TABLE_HEADER = f"{'Instance':<16}{'Optimality Gap':<16}{'Elapsed Time (s)':<18}{'T_evac':<12}{'Cost':<12}"


def _load_instance(path: str):
    try:
        return scenario.load_instance(Path(path).read_text())
    except (OSError, scenario.InstanceLoadError, InstanceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _cmd_generate(args) -> int:
    cfg_fields = {f.name for f in fields(scenario.GeneratorConfig)}
    raw = {}
    if args.config:
        try:
            raw = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: cannot read config: {exc}", file=sys.stderr)
            return EXIT_USAGE
        unknown = set(raw) - cfg_fields
        if unknown:
            print(f"error: unknown config fields {sorted(unknown)}", file=sys.stderr)
            return EXIT_USAGE
        for name in ("demand_range", "travel_time_range", "tau_range", "eta_range"):
            if name in raw:
                raw[name] = tuple(raw[name])
    if args.seed is not None:
        raw["seed"] = args.seed
    try:
        config = scenario.GeneratorConfig(**raw)
        instance = scenario.generate(config)
    except scenario.GeneratorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    Path(args.out).write_text(scenario.save_instance(instance))
    print(f"wrote {args.out}: {len(instance.pickups)} pickups, {len(instance.shelters)} shelters, "
          f"{len(instance.bus_ids)} buses, Q={instance.capacity}, T={instance.trips}")
    return EXIT_OK


def _cmd_solve(args) -> int:
    instance = _load_instance(args.instance)
    label = Path(args.instance).stem
    config = SolverConfig(
        gap_tol=args.gap,
        time_limit_s=args.time_limit,
        workers=args.workers,
        seed=args.seed,
    )
    try:
        result = solve_instance(instance, mode=args.mode, config=config, label=label)
    except InstanceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE

    if args.mps:
        Path(args.mps).write_text(export_mps(result.milp))
        print(f"wrote {args.mps}", file=sys.stderr)

    stats = result.stats
    if result.plan is None:
        print(_TABLE_HEADER)
        print(f"{label:<16}{format_gap(stats.gap):<16}{stats.wall_s:<18.2f}{'-':<12}{'-':<12}")
        if stats.termination == "infeasible":
            print("no feasible plan exists", file=sys.stderr)
            return EXIT_INFEASIBLE
        print("stopped without an incumbent (termination: " + stats.termination + ")",
              file=sys.stderr)
        return EXIT_NO_INCUMBENT

    print(_TABLE_HEADER)
    print(
        f"{label:<16}{format_gap(stats.gap):<16}{stats.wall_s:<18.2f}"
        f"{result.plan.t_evac:<12.2f}{result.plan.cost:<12.2f}"
    )
    if args.out:
        Path(args.out).write_text(planio.write_plan(result.plan, label, result.mode))
        print(f"wrote {args.out}", file=sys.stderr)
    return EXIT_OK


def _cmd_validate(args) -> int:
    instance = _load_instance(args.instance)
    try:
        plan, _ = planio.read_plan(instance, Path(args.plan).read_text())
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    report = check_plan(instance, plan)
    if report.ok:
        print("plan is feasible")
        return EXIT_OK
    print(f"plan violates {len(report.violations)} constraint(s):", file=sys.stderr)
    for v in report.violations[:50]:
        print(f"  {v}", file=sys.stderr)
    return EXIT_INFEASIBLE


def _cmd_report(args) -> int:
    instance = _load_instance(args.instance)
    try:
        plan, _ = planio.read_plan(instance, Path(args.plan).read_text())
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    report = check_plan(instance, plan)
    if not report.ok:
        print("plan is infeasible; refusing to report routes", file=sys.stderr)
        for v in report.violations[:10]:
            print(f"  {v}", file=sys.stderr)
        return EXIT_INFEASIBLE

    outdir = Path(args.routes_out)
    outdir.mkdir(parents=True, exist_ok=True)
    routes = extract_routes(plan)
    for m, legs in routes.items():
        lines = [f"# route of bus {m}", "# trip from to depart_s arrive_s load_before load_after"]
        for leg in legs:
            if leg.idle:
                lines.append(f"{leg.trip} idle idle {leg.depart:g} {leg.arrive:g} "
                             f"{leg.load_before} {leg.load_after}")
            else:
                lines.append(f"{leg.trip} {leg.arc[0]} {leg.arc[1]} {leg.depart:g} {leg.arrive:g} "
                             f"{leg.load_before} {leg.load_after}")
        (outdir / f"route_{m}.txt").write_text("\n".join(lines) + "\n")
    doses = compute_doses(instance, plan)
    lines = ["# pickup bus dose_mSv"]
    for (p, m), dose in sorted(doses.items()):
        lines.append(f"{p} {m} {dose:.9g}")
    (outdir / "doses.txt").write_text("\n".join(lines) + "\n")
    print(f"wrote {len(routes)} route files and doses.txt to {outdir}")
    return EXIT_OK


def _cmd_oracle(args) -> int:
    instance = _load_instance(args.instance)
    try:
        result = brute_force_oracle(instance)
    except SearchSpaceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if result.status == "infeasible":
        print("instance is infeasible")
        return EXIT_INFEASIBLE
    print(f"optimal cost: {result.objective:g}")
    print(f"T_evac: {result.plan.t_evac:g}")
    for m, legs in extract_routes(result.plan).items():
        print(f"bus {m}:")
        for leg in legs:
            print(f"  {leg}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="busevac",
        description="Bus evacuation planning under radiation exposure limits.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="draw a random instance and write an .evac file")
    g.add_argument("--config", help="JSON file with GeneratorConfig fields")
    g.add_argument("--seed", type=int, default=None, help="override the config seed")
    g.add_argument("--out", required=True, help="output .evac path")
    g.set_defaults(func=_cmd_generate)

    s = sub.add_parser("solve", help="solve an instance and print the result table")
    s.add_argument("instance", help=".evac file")
    s.add_argument("--mode", choices=MODES, default="exact")
    s.add_argument("--gap", type=float, default=1e-4, help="relative gap tolerance")
    s.add_argument("--time-limit", type=float, default=3600.0, help="wall seconds")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", help="write the plan file here")
    s.add_argument("--mps", help="export the solved MILP in MPS format")
    s.set_defaults(func=_cmd_solve)

    v = sub.add_parser("validate", help="check a plan against the original constraints")
    v.add_argument("instance")
    v.add_argument("plan")
    v.set_defaults(func=_cmd_validate)

    r = sub.add_parser("report", help="emit per-bus route files and the dose table")
    r.add_argument("instance")
    r.add_argument("plan")
    r.add_argument("--routes-out", required=True)
    r.set_defaults(func=_cmd_report)

    o = sub.add_parser("oracle", help="exhaustive optimum for tiny instances")
    o.add_argument("instance")
    o.set_defaults(func=_cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
