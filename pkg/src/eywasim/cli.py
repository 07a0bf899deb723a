"""Command line entry point.

Exit codes: 0 success with all assertions passing, 1 assertion failure,
2 validation or usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .net_model import CapacityError, ValidationError
from .report import emit, run_scenario
from .rules_matrix import format_matrix, rules_conformance
from .scenarios import ScenarioDoc, builtin_scenarios, load_scenario

EXIT_OK = 0
EXIT_ASSERTION = 1
EXIT_USAGE = 2


def _resolve_scenario(name_or_path: str) -> ScenarioDoc:
    builtins = builtin_scenarios()
    if name_or_path in builtins:
        return builtins[name_or_path]
    if not os.path.exists(name_or_path):
        raise ValidationError(
            f"no builtin scenario or file named {name_or_path!r}")
    return load_scenario(name_or_path)


def _cmd_run(args) -> int:
    doc = _resolve_scenario(args.scenario)
    if args.mode:
        doc.mode = args.mode
        doc.topology.mode = args.mode
    seed = args.seed
    if seed is None:
        env = os.environ.get("EYWA_SIM_SEED")
        seed = int(env) if env else None
    report, sim = run_scenario(doc, seed=seed)
    emit(report, sim, args.out)
    if args.plot:
        from .plotting import render_throughput
        render_throughput(sim.samples, args.out)
    for a in report.assertions:
        status = "PASS" if a["pass"] else "FAIL"
        print(f"[{status}] {a['name']}: measured={a['measured']} "
              f"expected={a['expected']} tol={a['tolerance']}")
    print(f"wrote {args.out}/throughput.csv, arp_events.csv, report.json")
    return EXIT_OK if report.ok else EXIT_ASSERTION


def _cmd_list(_args) -> int:
    for name, doc in sorted(builtin_scenarios().items()):
        print(f"{name:<28} mode={doc.mode:<10} duration={doc.duration_s:g}s "
              f"assertions={len(doc.assertions)}")
    return EXIT_OK


def _cmd_rules_check(_args) -> int:
    report = rules_conformance()
    print(format_matrix(report))
    return EXIT_OK if report.ok else EXIT_ASSERTION


def _cmd_validate(args) -> int:
    doc = load_scenario(args.scenario)
    print(f"{doc.name}: valid ({len(doc.timeline)} timeline actions, "
          f"{len(doc.assertions)} assertions)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eywasim",
        description="Deterministic simulator of shared-gateway overlay "
                    "networking with per-host ARP control agents.")
    sub = parser.add_subparsers(dest="command")

    run_p = sub.add_parser("run", help="run a scenario and emit artifacts")
    run_p.add_argument("--scenario", required=True,
                       help="builtin name or path to a scenario JSON file")
    run_p.add_argument("--out", required=True, help="output directory")
    run_p.add_argument("--seed", type=int, default=None)
    run_p.add_argument("--mode", choices=["eywa", "mvrrp", "single_vr"],
                       default=None, help="override the scenario's mode")
    run_p.add_argument("--plot", action="store_true",
                       help="also render throughput.png")
    run_p.set_defaults(func=_cmd_run)

    list_p = sub.add_parser("list", help="list builtin scenarios")
    list_p.set_defaults(func=_cmd_list)

    rules_p = sub.add_parser("rules-check",
                             help="verify the ARP rule matrix")
    rules_p.set_defaults(func=_cmd_rules_check)

    val_p = sub.add_parser("validate", help="validate a scenario file")
    val_p.add_argument("--scenario", required=True)
    val_p.set_defaults(func=_cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "func", None):
        parser.print_help()
        return EXIT_USAGE
    try:
        return args.func(args)
    except (ValidationError, CapacityError, OSError,
            json.JSONDecodeError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
