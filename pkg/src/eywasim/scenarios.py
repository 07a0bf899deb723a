"""Scenario documents: JSON schema, validation, and the builtin library.

A scenario is pure data: a topology, a timed action list, and declarative
assertions evaluated against the run's telemetry.  Builtins reproduce the
throughput experiments (fixed fleets, autoscaling, inter-tenant 1-to-1 and
1-to-N, mixed north-south/east-west) plus failover, orphan flux, and
migration behaviors, with baseline variants for comparison.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple

from .agent import AgentConfig
from .net_model import (
    ExternalSpec,
    HostSpec,
    TenantSpec,
    TopologySpec,
    ValidationError,
    VmSpec,
    VrSpec,
)

TIMELINE_ACTIONS = (
    "start_flow", "stop_flow", "kill_vr", "start_vr", "kill_host",
    "migrate_vm", "add_vm", "remove_vm",
)

#: structural checks appended to every builtin scenario's assertion list
CONTAINMENT_ASSERTIONS = [
    {"name": "no_tunneled_garp", "kind": "counter_max",
     "counter": "tunneled_garp", "expected": 0, "tolerance": 0},
    {"name": "no_runtime_na", "kind": "counter_max",
     "counter": "runtime_na", "expected": 0, "tolerance": 0},
    {"name": "tunneled_broadcast_rules", "kind": "broadcast_rules",
     "expected": "subset", "tolerance": 0},
    {"name": "gateway_replies_at_most_one", "kind": "counter_max",
     "counter": "max_gateway_replies", "expected": 1, "tolerance": 0},
]


@dataclass
class ScenarioDoc:
    name: str
    mode: str = "eywa"
    duration_s: float = 30.0
    seed: int = 0
    sampling_interval: float = 0.1
    topology: TopologySpec = field(default_factory=TopologySpec)
    # (time_s, action, params)
    timeline: List[Tuple[float, str, dict]] = field(default_factory=list)
    assertions: List[dict] = field(default_factory=list)

    def validate(self) -> None:
        if self.mode not in ("eywa", "mvrrp", "single_vr"):
            raise ValidationError(f"unknown mode {self.mode!r}")
        if self.duration_s < 0:
            raise ValidationError("duration must be >= 0")
        if self.sampling_interval <= 0:
            raise ValidationError("sampling interval must be positive")
        last = 0.0
        known_vms = {vm.vm_id for t in self.topology.tenants for vm in t.vms}
        known_vrs = {vr.vr_id for t in self.topology.tenants for vr in t.vrs}
        known_hosts = {h.host_id for h in self.topology.hosts}
        known_ext = {e.ext_id for e in self.topology.externals}
        for time_s, action, params in self.timeline:
            if action not in TIMELINE_ACTIONS:
                raise ValidationError(f"unknown timeline action {action!r}")
            if time_s < last:
                raise ValidationError("timeline actions must be time-sorted")
            last = time_s
            if action == "add_vm":
                known_vms.add(params["vm_id"])
            elif action == "start_vr":
                known_vrs.add(params["vr_id"])
            elif action == "start_flow":
                kind = params.get("kind")
                if kind in ("outbound", "eastwest"):
                    if params["src"] not in known_vms:
                        raise ValidationError(
                            f"flow {params.get('flow_id')}: unknown vm "
                            f"{params['src']}")
                elif kind == "inbound":
                    if params["src"] not in known_ext:
                        raise ValidationError(
                            f"flow {params.get('flow_id')}: unknown external "
                            f"{params['src']}")
                else:
                    raise ValidationError(
                        f"flow {params.get('flow_id')}: bad kind {kind!r}")
            elif action == "kill_vr" and params["vr_id"] not in known_vrs:
                raise ValidationError(f"kill_vr: unknown vr {params['vr_id']}")
            elif action == "kill_host" and params["host_id"] not in known_hosts:
                raise ValidationError(
                    f"kill_host: unknown host {params['host_id']}")
            elif action == "migrate_vm":
                if params["vm_id"] not in known_vms:
                    raise ValidationError(
                        f"migrate_vm: unknown vm {params['vm_id']}")
                if params["dst_host"] not in known_hosts:
                    raise ValidationError(
                        f"migrate_vm: unknown host {params['dst_host']}")
            elif action == "remove_vm" and params["vm_id"] not in known_vms:
                raise ValidationError(
                    f"remove_vm: unknown vm {params['vm_id']}")

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        topo = {
            "hosts": [asdict(h) for h in self.topology.hosts],
            "externals": [asdict(e) for e in self.topology.externals],
            "tenants": [asdict(t) for t in self.topology.tenants],
            "agent_config": asdict(self.topology.agent_config),
        }
        return {
            "name": self.name,
            "mode": self.mode,
            "duration_s": self.duration_s,
            "seed": self.seed,
            "sampling_interval": self.sampling_interval,
            "topology": topo,
            "timeline": [
                {"time_s": t, "action": a, "params": p}
                for t, a, p in self.timeline],
            "assertions": self.assertions,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioDoc":
        topo_data = data.get("topology", {})
        tenants = []
        for td in topo_data.get("tenants", []):
            vms = [VmSpec(**vd) for vd in td.get("vms", [])]
            vrs = []
            for rd in td.get("vrs", []):
                rd = dict(rd)
                # JSON object keys are strings; LB ports are ints
                rd["lb_members"] = {
                    int(port): list(members)
                    for port, members in (rd.get("lb_members") or {}).items()}
                vrs.append(VrSpec(**rd))
            tenants.append(TenantSpec(
                tenant_id=td["tenant_id"],
                gateway_ip=td.get("gateway_ip", "10.0.0.1"),
                vms=vms, vrs=vrs))
        mode = data.get("mode", "eywa")
        topology = TopologySpec(
            hosts=[HostSpec(**h) for h in topo_data.get("hosts", [])],
            externals=[ExternalSpec(**e) for e in topo_data.get("externals", [])],
            tenants=tenants,
            mode=mode,
            agent_config=AgentConfig(**topo_data.get("agent_config", {})),
        )
        timeline = []
        for entry in data.get("timeline", []):
            timeline.append((float(entry["time_s"]), entry["action"],
                             dict(entry.get("params", {}))))
        return cls(
            name=data.get("name", "unnamed"),
            mode=mode,
            duration_s=float(data.get("duration_s", 30.0)),
            seed=int(data.get("seed", 0)),
            sampling_interval=float(data.get("sampling_interval", 0.1)),
            topology=topology,
            timeline=timeline,
            assertions=list(data.get("assertions", [])),
        )


def load_scenario(path: str) -> ScenarioDoc:
    with open(path) as fh:
        data = json.load(fh)
    doc = ScenarioDoc.from_dict(data)
    doc.validate()
    return doc


# ---------------------------------------------------------------------------
# builtin library

GBPS = 1e9
EXT_CAPACITY = 100e9  # fat upstream so the external side never bottlenecks
REL_TOL = 0.005
STAGE = 30.0


def _steady(start: float, end: float) -> List[float]:
    """Measurement window: final 50% of a stage, end-exclusive."""
    return [start + (end - start) / 2.0, end]


def _pair_hosts(n: int, cap: float = GBPS) -> List[HostSpec]:
    return [HostSpec(f"h{i:02d}", capacity_bps=cap) for i in range(1, n + 1)]


def _fig11(mode: str) -> ScenarioDoc:
    hosts = _pair_hosts(10)
    vms, vrs = [], []
    for i in range(1, 11):
        host = f"h{i:02d}"
        vm_id, vr_id = f"vm{i:02d}", f"vr{i:02d}"
        vms.append(VmSpec(vm_id=vm_id, tenant="acme",
                          private_ip=f"10.0.0.{10 + i}", host=host))
        if mode != "single_vr" or i == 1:
            vrs.append(VrSpec(
                vr_id=vr_id, tenant="acme", host=host,
                public_ip=f"203.0.113.{i}",
                gateway_ip=f"10.0.1.{i}" if mode == "mvrrp" else None,
                lb_members={80: [vm_id]}))
    if mode == "single_vr":
        vrs[0].lb_members = {80: [f"vm{i:02d}" for i in range(1, 11)]}
    topo = TopologySpec(
        hosts=hosts, externals=[ExternalSpec("ext01", EXT_CAPACITY)],
        tenants=[TenantSpec("acme", vms=vms, vrs=vrs)], mode=mode)
    timeline = []
    for i in range(1, 11):
        timeline.append((0.2, "start_flow", {
            "flow_id": f"ns{i:02d}", "kind": "outbound",
            "src": f"vm{i:02d}", "dst": "ext01"}))
    expect_tx = 10 * GBPS if mode != "single_vr" else 1 * GBPS
    assertions = [
        {"name": "aggregate_outbound", "kind": "steady_sum",
         "entity_type": "vm", "metric": "tx", "window": _steady(0, STAGE),
         "expected": expect_tx, "tolerance": REL_TOL},
    ]
    if mode == "eywa":
        for i in range(1, 11):
            timeline.append((0.2, "start_flow", {
                "flow_id": f"sn{i:02d}", "kind": "inbound",
                "src": "ext01", "dst": f"vm{i:02d}"}))
        assertions.append(
            {"name": "aggregate_inbound", "kind": "steady_sum",
             "entity_type": "vm", "metric": "rx", "window": _steady(0, STAGE),
             "expected": 10 * GBPS, "tolerance": REL_TOL})
    if mode == "mvrrp":
        assertions.append({"name": "assignments_immutable",
                           "kind": "assignment_immutable",
                           "expected": True, "tolerance": 0})
    name = "fig11_outbound" if mode == "eywa" else f"fig11_outbound_{mode}"
    return ScenarioDoc(name=name, mode=mode, duration_s=STAGE,
                       topology=topo, timeline=sorted_timeline(timeline),
                       assertions=assertions)


def _fig12() -> ScenarioDoc:
    hosts = _pair_hosts(10)
    stages = [2, 4, 6, 8, 10, 8, 6, 4, 2]

    def vm_spec(i):
        return VmSpec(vm_id=f"vm{i:02d}", tenant="acme",
                      private_ip=f"10.0.0.{10 + i}", host=f"h{i:02d}")

    def vr_spec(i):
        return VrSpec(vr_id=f"vr{i:02d}", tenant="acme", host=f"h{i:02d}",
                      public_ip=f"203.0.113.{i}",
                      lb_members={80: [f"vm{i:02d}"]})

    topo = TopologySpec(
        hosts=hosts, externals=[ExternalSpec("ext01", EXT_CAPACITY)],
        tenants=[TenantSpec(
            "acme", vms=[vm_spec(1), vm_spec(2)], vrs=[vr_spec(1), vr_spec(2)])],
        mode="eywa")

    timeline = [
        (0.2, "start_flow", {"flow_id": "ns01", "kind": "outbound",
                             "src": "vm01", "dst": "ext01"}),
        (0.2, "start_flow", {"flow_id": "ns02", "kind": "outbound",
                             "src": "vm02", "dst": "ext01"}),
    ]
    # growth: +2 pairs per stage boundary; shrink mirrors it
    for boundary, pair in [(30.0, (3, 4)), (60.0, (5, 6)),
                           (90.0, (7, 8)), (120.0, (9, 10))]:
        for i in pair:
            timeline.append((boundary, "start_vr", asdict(vr_spec(i))))
            timeline.append((boundary, "add_vm", asdict(vm_spec(i))))
            timeline.append((boundary, "start_flow", {
                "flow_id": f"ns{i:02d}", "kind": "outbound",
                "src": f"vm{i:02d}", "dst": "ext01"}))
    for boundary, pair in [(150.0, (9, 10)), (180.0, (7, 8)),
                           (210.0, (5, 6)), (240.0, (3, 4))]:
        for i in pair:
            timeline.append((boundary, "stop_flow", {"flow_id": f"ns{i:02d}"}))
            timeline.append((boundary, "remove_vm", {"vm_id": f"vm{i:02d}"}))
            timeline.append((boundary, "kill_vr", {"vr_id": f"vr{i:02d}"}))

    assertions = []
    for idx, pairs in enumerate(stages):
        start = idx * STAGE
        assertions.append({
            "name": f"stage{idx}_pairs{pairs}", "kind": "steady_sum",
            "entity_type": "vm", "metric": "tx",
            "window": _steady(start, start + STAGE),
            "expected": pairs * GBPS, "tolerance": REL_TOL})
    return ScenarioDoc(name="fig12_autoscale", duration_s=len(stages) * STAGE,
                       topology=topo, timeline=sorted_timeline(timeline),
                       assertions=assertions)


def _two_tenant_topology(ew_and_ns: bool, mode: str = "eywa") -> TopologySpec:
    """5+5 hosts split between two tenants, one VR per host (or per tenant).

    With `ew_and_ns` each host carries two VMs (east-west + north-south) on
    2 Gbps host links; otherwise one VM per host on 1 Gbps links.
    """
    cap = 2 * GBPS if ew_and_ns else GBPS
    hosts = _pair_hosts(10, cap)
    tenants = []
    for t_idx, tenant in enumerate(("acme", "beta")):
        vms, vrs = [], []
        for i in range(1, 6):
            host = f"h{t_idx * 5 + i:02d}"
            if ew_and_ns:
                ew = f"{tenant[0]}_ew{i}"
                ns = f"{tenant[0]}_ns{i}"
                vms.append(VmSpec(vm_id=ew, tenant=tenant, host=host,
                                  private_ip=f"10.0.0.{10 + i}",
                                  role="east-west", nic_capacity_bps=GBPS))
                vms.append(VmSpec(vm_id=ns, tenant=tenant, host=host,
                                  private_ip=f"10.0.0.{20 + i}",
                                  role="north-south", nic_capacity_bps=GBPS))
                members = [ew]
            else:
                vm_id = f"{tenant[0]}_vm{i}"
                vms.append(VmSpec(vm_id=vm_id, tenant=tenant, host=host,
                                  private_ip=f"10.0.0.{10 + i}"))
                members = [vm_id]
            if mode != "single_vr":
                vrs.append(VrSpec(
                    vr_id=f"{tenant[0]}_vr{i}", tenant=tenant, host=host,
                    public_ip=f"203.0.113.{t_idx * 100 + i}",
                    lb_members={80: members}))
        if mode == "single_vr":
            all_members = [vm.vm_id for vm in vms
                           if not ew_and_ns or vm.role == "east-west"]
            vrs = [VrSpec(
                vr_id=f"{tenant[0]}_vr1", tenant=tenant,
                host=f"h{t_idx * 5 + 1:02d}",
                public_ip=f"203.0.113.{t_idx * 100 + 1}",
                port_capacity_bps=GBPS,
                lb_members={80: all_members})]
        tenants.append(TenantSpec(tenant, vms=vms, vrs=vrs))
    return TopologySpec(
        hosts=hosts, externals=[ExternalSpec("ext01", EXT_CAPACITY)],
        tenants=tenants, mode=mode)


def _fig13() -> ScenarioDoc:
    topo = _two_tenant_topology(ew_and_ns=False)
    timeline = []
    for i in range(1, 6):
        timeline.append((0.2, "start_flow", {
            "flow_id": f"ew{i}", "kind": "eastwest",
            "src": f"a_vm{i}", "dst": f"b_vm{i}"}))
    assertions = [
        {"name": "per_vm_average", "kind": "steady_mean",
         "entity_type": "vm",
         "entities": [f"a_vm{i}" for i in range(1, 6)],
         "metric": "tx", "window": _steady(0, STAGE),
         "expected": GBPS, "tolerance": REL_TOL},
        {"name": "per_vm_each", "kind": "steady_each",
         "entity_type": "vm",
         "entities": [f"a_vm{i}" for i in range(1, 6)],
         "metric": "tx", "window": _steady(0, STAGE),
         "expected": GBPS, "tolerance": REL_TOL},
    ]
    return ScenarioDoc(name="fig13_1to1", duration_s=STAGE, topology=topo,
                       timeline=sorted_timeline(timeline),
                       assertions=assertions)


def _fig14() -> ScenarioDoc:
    topo = _two_tenant_topology(ew_and_ns=False)
    timeline = []
    for i in range(1, 6):
        for j in range(1, 6):
            timeline.append((0.2, "start_flow", {
                "flow_id": f"ab{i}{j}", "kind": "eastwest",
                "src": f"a_vm{i}", "dst": f"b_vm{j}"}))
            timeline.append((0.2, "start_flow", {
                "flow_id": f"ba{j}{i}", "kind": "eastwest",
                "src": f"b_vm{j}", "dst": f"a_vm{i}"}))
    all_vms = [f"a_vm{i}" for i in range(1, 6)] + [
        f"b_vm{i}" for i in range(1, 6)]
    assertions = [
        # every VM saturates its NIC, so the host-pair aggregates sum to the
        # capacities of all communicating pairs
        {"name": "pair_aggregate_total", "kind": "steady_sum",
         "entity_type": "vm", "metric": "tx", "window": _steady(0, STAGE),
         "expected": 10 * GBPS, "tolerance": REL_TOL},
        {"name": "per_vm_each", "kind": "steady_each",
         "entity_type": "vm", "entities": all_vms,
         "metric": "tx", "window": _steady(0, STAGE),
         "expected": GBPS, "tolerance": REL_TOL},
    ]
    return ScenarioDoc(name="fig14_1toN", duration_s=STAGE, topology=topo,
                       timeline=sorted_timeline(timeline),
                       assertions=assertions)


def _fig15(mode: str) -> ScenarioDoc:
    topo = _two_tenant_topology(ew_and_ns=True, mode=mode)
    timeline = []
    for tenant, other in (("a", "b"), ("b", "a")):
        for i in range(1, 6):
            timeline.append((0.2, "start_flow", {
                "flow_id": f"{tenant}_ns{i}", "kind": "outbound",
                "src": f"{tenant}_ns{i}", "dst": "ext01"}))
            for j in range(1, 6):
                timeline.append((0.2, "start_flow", {
                    "flow_id": f"{tenant}{other}_ew{i}{j}", "kind": "eastwest",
                    "src": f"{tenant}_ew{i}", "dst": f"{other}_ew{j}"}))
    pairs = [[f"a_ew{i}", f"a_ns{i}", f"b_ew{i}", f"b_ns{i}"]
             for i in range(1, 6)]
    if mode == "eywa":
        assertions = [
            {"name": f"host_pair_{i}_aggregate", "kind": "steady_sum",
             "entity_type": "vm", "entities": group,
             "metric": "tx", "window": _steady(0, STAGE),
             "expected": 4 * GBPS, "tolerance": REL_TOL}
            for i, group in enumerate(pairs, start=1)]
        name = "fig15_mixed"
    else:
        # one 1 Gbps router port per tenant caps everything at 2 x 1 Gbps
        assertions = [
            {"name": "total_capped_at_two_links", "kind": "steady_sum",
             "entity_type": "vm", "metric": "tx", "window": _steady(0, STAGE),
             "expected": 2 * GBPS, "tolerance": REL_TOL},
            {"name": "host_pair_cap", "kind": "pair_cap",
             "pairs": pairs, "metric": "tx", "window": _steady(0, STAGE),
             "expected": 2 * GBPS, "tolerance": REL_TOL},
        ]
        name = f"fig15_mixed_{mode}"
    return ScenarioDoc(name=name, mode=mode, duration_s=STAGE, topology=topo,
                       timeline=sorted_timeline(timeline),
                       assertions=assertions)


def _failover() -> ScenarioDoc:
    hosts = _pair_hosts(2)
    topo = TopologySpec(
        hosts=hosts, externals=[ExternalSpec("ext01", EXT_CAPACITY)],
        tenants=[TenantSpec("acme", vms=[
            VmSpec("vm01", "acme", "10.0.0.11", "h01"),
            VmSpec("vm02", "acme", "10.0.0.12", "h02"),
        ], vrs=[
            VrSpec("vr01", "acme", "h01", "203.0.113.1",
                   lb_members={80: ["vm01"]}),
            VrSpec("vr02", "acme", "h02", "203.0.113.2",
                   lb_members={80: ["vm02"]}),
        ])], mode="eywa")
    timeline = [
        (0.2, "start_flow", {"flow_id": "ns01", "kind": "outbound",
                             "src": "vm01", "dst": "ext01"}),
        # survivor runs at half line rate so its VR stays below the ARP
        # overload threshold and can serve the orphaned neighbor
        (0.2, "start_flow", {"flow_id": "ns02", "kind": "outbound",
                             "src": "vm02", "dst": "ext01",
                             "demand_bps": 0.5 * GBPS}),
        (5.0, "kill_vr", {"vr_id": "vr01"}),
    ]
    # regain bound: kill + miss_threshold*health_interval + vm ttl + retry
    deadline = 5.0 + 3 * 1.0 + 30.0 + 1.0
    assertions = [
        {"name": "regain_within_bound", "kind": "regain_by",
         "flow": "ns01", "after": 5.0,
         "expected": deadline, "tolerance": 0},
        {"name": "survivor_uninterrupted", "kind": "min_rate",
         "entity_type": "vm", "entity_id": "vm02", "metric": "tx",
         "window": [1.0, 40.0], "expected": 0.49 * GBPS, "tolerance": 0},
    ]
    return ScenarioDoc(name="failover_vr_kill", duration_s=40.0,
                       topology=topo, timeline=timeline,
                       assertions=assertions)


def _failover_mvrrp() -> ScenarioDoc:
    hosts = _pair_hosts(2)
    topo = TopologySpec(
        hosts=hosts, externals=[ExternalSpec("ext01", EXT_CAPACITY)],
        tenants=[TenantSpec("acme", vms=[
            VmSpec("vm01", "acme", "10.0.0.11", "h01"),
            VmSpec("vm02", "acme", "10.0.0.12", "h02"),
        ], vrs=[
            VrSpec("vr01", "acme", "h01", "203.0.113.1",
                   gateway_ip="10.0.1.1", lb_members={80: ["vm01"]}),
            VrSpec("vr02", "acme", "h02", "203.0.113.2",
                   gateway_ip="10.0.1.2", lb_members={80: ["vm02"]}),
        ])], mode="mvrrp")
    timeline = [
        (0.2, "start_flow", {"flow_id": "ns01", "kind": "outbound",
                             "src": "vm01", "dst": "ext01"}),
        (0.2, "start_flow", {"flow_id": "ns02", "kind": "outbound",
                             "src": "vm02", "dst": "ext01"}),
        (10.5, "kill_vr", {"vr_id": "vr01"}),
    ]
    assertions = [
        {"name": "new_master_within_3s", "kind": "promotion_delay",
         "virtual_ip": "10.0.1.1", "after": 10.5,
         "expected": 3.0, "tolerance": 0},
        {"name": "assignments_immutable", "kind": "assignment_immutable",
         "expected": True, "tolerance": 0},
        {"name": "regain_after_takeover", "kind": "regain_by",
         "flow": "ns01", "after": 10.5, "expected": 14.0, "tolerance": 0},
    ]
    return ScenarioDoc(name="failover_vr_kill_mvrrp", mode="mvrrp",
                       duration_s=30.0, topology=topo, timeline=timeline,
                       assertions=assertions)


def _flux_orphan() -> ScenarioDoc:
    hosts = _pair_hosts(4)
    vrs = [VrSpec(f"vr{i:02d}", "acme", f"h{i:02d}", f"203.0.113.{i}",
                  lb_members={80: ["vm01"]} if i == 1 else {})
           for i in range(1, 5)]
    topo = TopologySpec(
        hosts=hosts, externals=[ExternalSpec("ext01", EXT_CAPACITY)],
        tenants=[TenantSpec("acme", vms=[
            VmSpec("vm01", "acme", "10.0.0.11", "h01")], vrs=vrs)],
        mode="eywa")
    timeline = [
        (0.2, "start_flow", {"flow_id": "ns01", "kind": "outbound",
                             "src": "vm01", "dst": "ext01"}),
        (5.0, "kill_vr", {"vr_id": "vr01"}),
    ]
    assertions = [
        # the orphan re-resolution broadcast reaches three healthy hosts;
        # each proxies, but only the first reply is let through
        {"name": "three_remote_proxies", "kind": "rule_count",
         "rule": "6-2", "expected": 3, "tolerance": 0},
        {"name": "one_reply_passes", "kind": "event_count",
         "rule": "12", "action": "pass", "expected": 1, "tolerance": 0},
        {"name": "duplicate_replies_filtered", "kind": "event_count",
         "rule": "12", "action": "filter", "expected": 2, "tolerance": 0},
        {"name": "regain_within_bound", "kind": "regain_by",
         "flow": "ns01", "after": 5.0, "expected": 39.0, "tolerance": 0},
    ]
    return ScenarioDoc(name="flux_orphan", duration_s=40.0, topology=topo,
                       timeline=timeline, assertions=assertions)


def _migration() -> ScenarioDoc:
    hosts = _pair_hosts(2)
    topo = TopologySpec(
        hosts=hosts, externals=[ExternalSpec("ext01", EXT_CAPACITY)],
        tenants=[TenantSpec("acme", vms=[
            VmSpec("vm01", "acme", "10.0.0.11", "h01"),
        ], vrs=[
            VrSpec("vr01", "acme", "h01", "203.0.113.1",
                   lb_members={80: ["vm01"]}),
            VrSpec("vr02", "acme", "h02", "203.0.113.2"),
        ])], mode="eywa")
    timeline = [
        (0.2, "start_flow", {"flow_id": "ns01", "kind": "outbound",
                             "src": "vm01", "dst": "ext01"}),
        (5.0, "migrate_vm", {"vm_id": "vm01", "dst_host": "h02"}),
    ]
    assertions = [
        # local VR -> remote VR after the move -> local again on rebind
        {"name": "hop_count_drops_on_rebind", "kind": "path_lengths",
         "flow": "ns01", "expected": [4, 6, 4], "tolerance": 0},
        {"name": "rebinds_to_local_vr", "kind": "gateway_mac",
         "vm": "vm01", "vr": "vr02", "expected": "vr02", "tolerance": 0},
        {"name": "gateway_ip_stable", "kind": "gateway_ip_unchanged",
         "vm": "vm01", "expected": "10.0.0.1", "tolerance": 0},
    ]
    return ScenarioDoc(name="migration_rebind", duration_s=40.0,
                       topology=topo, timeline=timeline,
                       assertions=assertions)


def sorted_timeline(entries):
    return sorted(entries, key=lambda e: e[0])


def builtin_scenarios() -> Dict[str, ScenarioDoc]:
    """Name -> scenario for every builtin, containment checks included."""
    docs = [
        _fig11("eywa"), _fig11("single_vr"), _fig11("mvrrp"),
        _fig12(),
        _fig13(),
        _fig14(),
        _fig15("eywa"), _fig15("single_vr"),
        _failover(), _failover_mvrrp(),
        _flux_orphan(),
        _migration(),
    ]
    out = {}
    for doc in docs:
        doc.assertions = doc.assertions + [dict(a) for a in
                                           CONTAINMENT_ASSERTIONS]
        doc.validate()
        out[doc.name] = doc
    return out
