"""Run a scenario, evaluate its assertions, and emit CSV/JSON artifacts.

Steady-state numbers are means over each assertion's window (by convention
the final 50% of a stage, end-exclusive).  Output files are plain functions
of the run telemetry, so fixed-seed runs rewrite them byte-identically.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from .engine import TUNNELABLE_BROADCAST_RULES, Simulation
from .net_model import ValidationError, build_topology
from .scenarios import ScenarioDoc

THROUGHPUT_HEADER = ["time_s", "entity_type", "entity_id", "tx_bps", "rx_bps"]
ARP_HEADER = ["time_s", "host", "direction", "kind", "rule_id", "action",
              "sender_ip", "target_ip"]

_EPS = 1e-9


@dataclass
class RunReport:
    scenario: str
    seed: int
    assertions: List[dict] = field(default_factory=list)
    counters: Dict[str, float] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(a["pass"] for a in self.assertions)

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "assertions": self.assertions,
            "counters": self.counters,
        }


# ---------------------------------------------------------------------------
# telemetry access helpers

def _in_window(t: float, window) -> bool:
    lo, hi = window
    return lo - _EPS <= t < hi - _EPS


def _entity_series(samples, entity_type, entity_id, metric, window):
    key = metric + "_bps"
    return [s[key] for s in samples
            if s["entity_type"] == entity_type and s["entity_id"] == entity_id
            and _in_window(s["time_s"], window)]


def _entity_ids(samples, entity_type):
    return sorted({s["entity_id"] for s in samples
                   if s["entity_type"] == entity_type})


def steady_mean(samples, entity_type, entity_id, metric, window) -> float:
    series = _entity_series(samples, entity_type, entity_id, metric, window)
    if not series:
        return 0.0
    return sum(series) / len(series)


# ---------------------------------------------------------------------------
# assertion evaluation

def _rel_ok(measured: float, expected: float, tol: float) -> bool:
    if expected == 0:
        return abs(measured) <= tol
    return abs(measured - expected) <= tol * abs(expected)


def evaluate_assertion(spec: dict, sim: Simulation) -> dict:
    kind = spec["kind"]
    samples = sim.samples
    expected = spec.get("expected")
    tol = spec.get("tolerance", 0)
    measured: object = None
    passed = False

    if kind == "steady_sum":
        ids = spec.get("entities") or _entity_ids(samples, spec["entity_type"])
        measured = sum(steady_mean(samples, spec["entity_type"], eid,
                                   spec["metric"], spec["window"])
                       for eid in ids)
        passed = _rel_ok(measured, expected, tol)

    elif kind == "steady_mean":
        ids = spec.get("entities") or _entity_ids(samples, spec["entity_type"])
        vals = [steady_mean(samples, spec["entity_type"], eid,
                            spec["metric"], spec["window"]) for eid in ids]
        measured = sum(vals) / len(vals) if vals else 0.0
        passed = _rel_ok(measured, expected, tol)

    elif kind == "steady_each":
        ids = spec.get("entities") or _entity_ids(samples, spec["entity_type"])
        vals = [steady_mean(samples, spec["entity_type"], eid,
                            spec["metric"], spec["window"]) for eid in ids]
        # report the worst deviator
        measured = min(vals, key=lambda v: -abs(v - expected), default=0.0)
        passed = bool(vals) and all(_rel_ok(v, expected, tol) for v in vals)

    elif kind == "min_rate":
        series = _entity_series(samples, spec["entity_type"],
                                spec["entity_id"], spec["metric"],
                                spec["window"])
        measured = min(series) if series else 0.0
        passed = measured >= expected

    elif kind == "regain_by":
        rec = sim.flows.get(spec["flow"])
        after = spec["after"]
        measured = None
        if rec is not None and rec.active:
            regains = [t for t, path in rec.history if t > after and path]
            if regains:
                measured = regains[-1]
        passed = measured is not None and measured <= expected

    elif kind == "rule_count":
        measured = sim.rule_counters().get(spec["rule"], 0)
        passed = measured == expected

    elif kind == "event_count":
        measured = sum(1 for ev in sim.arp_events
                       if ev.rule_id == spec["rule"]
                       and ev.action == spec["action"])
        passed = measured == expected

    elif kind == "counter_max":
        name = spec["counter"]
        if name == "tunneled_garp":
            measured = sim.tunneled_garp
        elif name == "runtime_na":
            measured = sim.runtime_na
        elif name == "max_gateway_replies":
            measured = sim.max_gateway_replies()
        else:
            raise ValidationError(f"unknown counter {name!r}")
        passed = measured <= expected

    elif kind == "broadcast_rules":
        offending = sorted(set(sim.tunneled_broadcast_rules())
                           - set(TUNNELABLE_BROADCAST_RULES))
        measured = offending
        passed = not offending

    elif kind == "pair_cap":
        aggregates = []
        for group in spec["pairs"]:
            aggregates.append(sum(
                steady_mean(samples, "vm", eid, spec["metric"], spec["window"])
                for eid in group))
        measured = max(aggregates) if aggregates else 0.0
        passed = measured <= expected * (1 + tol)

    elif kind == "promotion_delay":
        delays = [p["time_s"] - spec["after"] for p in sim.vrrp_promotions
                  if p["virtual_ip"] == spec["virtual_ip"]]
        measured = delays[0] if delays else None
        passed = measured is not None and 0 <= measured <= expected

    elif kind == "assignment_immutable":
        current = dict(sim.assignment.table) if sim.assignment else {}
        measured = current == sim.initial_assignment
        passed = bool(measured)

    elif kind == "path_lengths":
        rec = sim.flows.get(spec["flow"])
        measured = [len(path) for _, path in rec.history] if rec else []
        passed = measured == expected

    elif kind == "gateway_mac":
        measured = sim.gateway_binding.get(spec["vm"])
        vr = sim.topo.vrs.get(spec["vr"])
        passed = vr is not None and measured == vr.mac

    elif kind == "gateway_ip_unchanged":
        stack = sim.stacks.get(spec["vm"])
        measured = stack.gateway_ip if stack else None
        passed = measured == expected

    else:
        raise ValidationError(f"unknown assertion kind {kind!r}")

    return {
        "name": spec["name"],
        "expected": _jsonable(expected),
        "measured": _jsonable(measured),
        "tolerance": tol,
        "pass": bool(passed),
    }


def _jsonable(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def collect_counters(sim: Simulation) -> Dict[str, float]:
    counters: Dict[str, float] = {}
    for rule, n in sorted(sim.rule_counters().items()):
        counters[f"rule_{rule}"] = n
    counters["tunneled_garp"] = sim.tunneled_garp
    counters["runtime_na"] = sim.runtime_na
    counters["max_gateway_replies"] = sim.max_gateway_replies()
    counters["anomalies"] = len(sim.anomaly_list())
    counters["arp_events"] = len(sim.arp_events)
    counters["vrrp_promotions"] = len(sim.vrrp_promotions)
    counters["events_run"] = sim.core.events_run
    return counters


# ---------------------------------------------------------------------------
# running and emission

def run_scenario(doc: ScenarioDoc, seed: Optional[int] = None
                 ) -> "tuple[RunReport, Simulation]":
    """Build, execute, and judge one scenario; returns (report, simulation)."""
    doc.validate()
    use_seed = doc.seed if seed is None else seed
    topo = build_topology(doc.topology)
    sim = Simulation(topo, seed=use_seed,
                     sampling_interval=doc.sampling_interval)
    sim.run(doc.duration_s, timeline=doc.timeline)
    report = RunReport(scenario=doc.name, seed=use_seed)
    for spec in doc.assertions:
        report.assertions.append(evaluate_assertion(spec, sim))
    report.counters = collect_counters(sim)
    return report, sim


def write_throughput_csv(samples: List[dict], path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(THROUGHPUT_HEADER)
        for s in samples:
            writer.writerow([
                "%.3f" % s["time_s"], s["entity_type"], s["entity_id"],
                "%.3f" % s["tx_bps"], "%.3f" % s["rx_bps"]])


def write_arp_events_csv(events, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ARP_HEADER)
        for ev in events:
            writer.writerow([
                "%.6f" % ev.time_s, ev.host, ev.direction, ev.kind,
                ev.rule_id, ev.action, ev.sender_ip, ev.target_ip])


def write_report_json(report: RunReport, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def emit(report: RunReport, sim: Simulation, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    write_throughput_csv(sim.samples, os.path.join(out_dir, "throughput.csv"))
    write_arp_events_csv(sim.arp_events,
                         os.path.join(out_dir, "arp_events.csv"))
    write_report_json(report, os.path.join(out_dir, "report.json"))
