"""End-to-end acceptance gate.

Each test covers one headline behavior and prints a single pass/fail line,
so a full run reads as a checklist.  Scenario runs are cached per session.
"""

import sys
import time

import pytest

from eywasim.net_model import VNI_SPACE, CapacityError, VniRegistry
from eywasim.report import emit, run_scenario
from eywasim.rules_matrix import rules_conformance
from eywasim.scenarios import CONTAINMENT_ASSERTIONS, builtin_scenarios


@pytest.fixture(scope="session")
def runs():
    """Run every builtin scenario once; (report, sim, wall_seconds) by name."""
    out = {}
    for name, doc in builtin_scenarios().items():
        t0 = time.perf_counter()
        report, sim = run_scenario(doc)
        out[name] = (report, sim, time.perf_counter() - t0)
    return out


def _verdict(label, ok):
    line = f"[{'PASS' if ok else 'FAIL'}] {label}"
    print(line, file=sys.__stdout__)
    assert ok, line


def _result(report, name):
    for a in report.assertions:
        if a["name"] == name:
            return a
    raise KeyError(f"{report.scenario} has no assertion {name!r}")


def _all_pass(report, names):
    return all(_result(report, n)["pass"] for n in names)


def test_criterion_01_rule_matrix_conformance():
    t0 = time.perf_counter()
    matrix = rules_conformance()
    elapsed = time.perf_counter() - t0
    ok = matrix.ok and matrix.total == 224 and elapsed < 1.0
    _verdict("criterion 1: ARP rule matrix, 100% of decisions match "
             f"({matrix.total} combos, {len(matrix.mismatches)} mismatches, "
             f"{elapsed:.2f}s)", ok)


def test_criterion_02_fixed_fleet_line_rate(runs):
    report, _, elapsed = runs["fig11_outbound"]
    ok = (_all_pass(report, ["aggregate_outbound", "aggregate_inbound"])
          and elapsed < 5.0)
    _verdict("criterion 2: 10-host fleet saturates 10 Gbps both directions "
             f"within 0.5% ({elapsed:.2f}s)", ok)


def test_criterion_03_autoscale_staircase(runs):
    report, _, _ = runs["fig12_autoscale"]
    stages = [a for a in report.assertions if a["name"].startswith("stage")]
    ok = len(stages) == 9 and all(a["pass"] for a in stages)
    _verdict("criterion 3: autoscale staircase tracks pair count up and down "
             f"({len(stages)} stages)", ok)


def test_criterion_04_one_to_one_fair_share(runs):
    report, _, _ = runs["fig13_1to1"]
    ok = _all_pass(report, ["per_vm_average", "per_vm_each"])
    _verdict("criterion 4: 1-to-1 cross-tenant traffic averages 1 Gbps "
             "per VM", ok)


def test_criterion_05_one_to_many_fair_share(runs):
    report, _, _ = runs["fig14_1toN"]
    ok = _all_pass(report, ["pair_aggregate_total", "per_vm_each"])
    _verdict("criterion 5: 1-to-N host-pair aggregates sum to the pair "
             "capacities", ok)


def test_criterion_06_mixed_traffic_vs_shared_vr(runs):
    eywa, _, _ = runs["fig15_mixed"]
    single, _, _ = runs["fig15_mixed_single_vr"]
    pair_names = [a["name"] for a in eywa.assertions
                  if a["name"].startswith("host_pair_")]
    ok = (_all_pass(eywa, pair_names)
          and _all_pass(single, ["total_capped_at_two_links",
                                 "host_pair_cap"]))
    _verdict("criterion 6: mixed traffic reaches 4 Gbps/host-pair with "
             "per-host gateways; one shared gateway caps at its two links",
             ok)


def test_criterion_07_gateway_failover(runs):
    report, sim, _ = runs["failover_vr_kill"]
    ok = (_all_pass(report, ["regain_within_bound", "survivor_uninterrupted",
                             "gateway_replies_at_most_one"])
          and sim.max_gateway_replies() == 1)
    _verdict("criterion 7: orphaned VM regains connectivity within the probe "
             "and cache deadline; exactly one proxy answers; the survivor "
             "never dips", ok)


def test_criterion_08_migration_rebind(runs):
    report, _, _ = runs["migration_rebind"]
    ok = _all_pass(report, ["hop_count_drops_on_rebind",
                            "rebinds_to_local_vr", "gateway_ip_stable"])
    _verdict("criterion 8: migrated VM rebinds to the co-resident gateway, "
             "hop count drops, gateway IP never changes", ok)


def test_criterion_09_broadcast_containment(runs):
    names = [a["name"] for a in CONTAINMENT_ASSERTIONS]
    bad = [n for n, (report, _, _) in sorted(runs.items())
           if not _all_pass(report, names)]
    _verdict("criterion 9: across all scenarios, no tunneled gratuitous "
             "announcements, only whitelisted broadcast rules cross hosts, "
             "no dead-rule traffic, at most one gateway reply "
             f"(violations: {bad or 'none'})", not bad)


def test_criterion_10_deterministic_outputs(tmp_path_factory):
    doc = builtin_scenarios()["flux_orphan"]
    outputs = []
    for sub in ("a", "b"):
        out = tmp_path_factory.mktemp("det") / sub
        report, sim = run_scenario(doc)
        emit(report, sim, str(out))
        outputs.append({name: (out / name).read_bytes()
                        for name in ("throughput.csv", "arp_events.csv",
                                     "report.json")})
    ok = outputs[0] == outputs[1]
    _verdict("criterion 10: repeated fixed-seed runs write byte-identical "
             "artifacts", ok)


def test_criterion_11_baseline_guarantees(runs):
    report, _, _ = runs["failover_vr_kill_mvrrp"]
    vrrp_ok = _all_pass(report, ["new_master_within_3s",
                                 "assignments_immutable"])
    reg = VniRegistry.prefilled(VNI_SPACE - 1)
    reg.allocate("last")
    try:
        reg.allocate("overflow")
        vni_ok = False
    except CapacityError:
        vni_ok = True
    _verdict("criterion 11: VRRP re-masters within 3s with immutable "
             "assignments; segment IDs exhaust at exactly 16,777,216",
             vrrp_ok and vni_ok)
