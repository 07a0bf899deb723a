"""Integrated simulation: topology + agents + dataplane on the event core.

Control-plane frames (ARP, probes, VRRP adverts) run as discrete events; data
traffic is fluid, re-solved with max-min fairness whenever bindings change.
One Simulation instance owns all mutable state and is strictly
single-threaded; many instances can run in parallel with nothing shared.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from . import agent as agent_mod
from . import baselines, dataplane, frames, net_model, simcore
from .agent import Action, AgentState, Direction, Mode, Origin
from .dataplane import VTEP_PORT, VmStack, VrState, VsiState, VtepState
from .frames import ArpFrame, ArpKind, ArpOp, classify
from .net_model import Topology, TopologySpec, ValidationError, VmSpec, VrSpec

#: ARP rule ids whose Pass branch may legitimately tunnel a broadcast.
TUNNELABLE_BROADCAST_RULES = ("7", "1-1", "21-1", "23-1")


@dataclass
class FlowSpec:
    flow_id: str
    kind: str          # outbound | eastwest | inbound
    src: str           # vm id (outbound/eastwest) or external id (inbound)
    dst: str           # external id (outbound) or vm id (eastwest/inbound)
    demand_bps: float = math.inf


@dataclass
class FlowRecord:
    spec: FlowSpec
    active: bool = False
    path: List = field(default_factory=list)
    rate_bps: float = 0.0
    # (time_s, path) recorded at every path change
    history: List[Tuple[float, List]] = field(default_factory=list)


@dataclass
class ArpEvent:
    time_s: float
    host: str
    direction: str
    kind: str
    rule_id: str
    action: str
    sender_ip: str
    target_ip: str
    tunneled_broadcast: bool = False


class Simulation:
    """One deterministic run over a topology.

    Drives agents in eywa mode; in mvrrp/single_vr the VTEP degenerates to a
    plain flood-and-learn tunnel and VRRP groups provide failover instead.
    """

    def __init__(self, topo: Topology, seed: int = 0,
                 sampling_interval: float = 0.1,
                 vm_cache_ttl: float = 30.0, arp_retry: float = 1.0):
        self.topo = topo
        self.seed = seed
        self.sampling_interval = sampling_interval
        self.vm_cache_ttl = vm_cache_ttl
        self.arp_retry = arp_retry
        self.core = simcore.Engine()

        self.vsis: Dict[Tuple[str, str], VsiState] = {}
        self.vteps: Dict[str, VtepState] = {
            h: VtepState(h) for h in topo.hosts}
        self.stacks: Dict[str, VmStack] = {}
        self.vr_states: Dict[str, VrState] = {}
        self.gateway_binding: Dict[str, Optional[str]] = {}
        self.flows: Dict[str, FlowRecord] = {}
        self._expiry_scheduled: Dict[str, float] = {}

        # telemetry
        self.samples: List[dict] = []
        self.arp_events: List[ArpEvent] = []
        self.reply_counts: Dict[Tuple[str, int], int] = {}
        self.tunneled_garp = 0
        self.runtime_na = 0
        self.mode_transitions: List[Tuple[float, str, str, str]] = []
        self.vrrp_promotions: List[dict] = []
        self.link_bytes: Dict = {}
        self._rates: Dict[str, float] = {}
        self._dirty = True
        self._last_account = 0.0

        if topo.mode == "mvrrp":
            self.assignment = baselines.GatewayAssignment(policy="latency")
            self.vrrp_groups = baselines.build_vrrp_groups(topo)
        else:
            self.assignment = None
            self.vrrp_groups = {}
        if topo.mode == "single_vr":
            baselines.single_vr_mode(topo)

        for vr in sorted(topo.vrs.values(), key=lambda v: v.vr_id):
            self._register_vr(vr)
        for vm in sorted(topo.vms.values(), key=lambda v: v.vm_id):
            self._register_vm(vm)
        self.initial_assignment = dict(self.assignment.table) if self.assignment else {}

    # ------------------------------------------------------------------
    # wiring

    def vsi(self, host: str, tenant: str) -> VsiState:
        key = (host, tenant)
        if key not in self.vsis:
            self.vsis[key] = VsiState()
        return self.vsis[key]

    def _register_vm(self, vm: net_model.Vm) -> None:
        gateway_ip = vm.gateway_ip
        if self.topo.mode == "mvrrp":
            gateway_ip = baselines.assign_gateway(
                self.assignment, self.topo, vm.vm_id)
            vm.gateway_ip = gateway_ip
        self.stacks[vm.vm_id] = VmStack(
            vm.private_ip, vm.mac, gateway_ip, vm.tenant,
            cache_ttl=self.vm_cache_ttl, arp_retry=self.arp_retry)
        self.gateway_binding[vm.vm_id] = None
        self.vsi(vm.host, vm.tenant).attach(vm.vm_id)

    def _register_vr(self, vr: net_model.Vr) -> None:
        state = VrState(vr.gateway_ip, vr.mac, vr.public_ip, vr.tenant,
                        lb_members=vr.spec.lb_members,
                        cache_ttl=self.vm_cache_ttl, arp_retry=self.arp_retry)
        state.owned_ips = {vr.gateway_ip}
        self.vr_states[vr.vr_id] = state
        self.vsi(vr.host, vr.tenant).attach(vr.vr_id)

    def _instance_at(self, host: str, tenant: str, port: str):
        if port in self.topo.vms:
            vm = self.topo.vms[port]
            if vm.host == host and vm.alive:
                return vm
        if port in self.topo.vrs:
            vr = self.topo.vrs[port]
            if vr.host == host and vr.alive:
                return vr
        return None

    def _mac_origin(self, mac: str, host: str) -> Origin:
        for vm in self.topo.vms.values():
            if vm.mac == mac:
                return Origin.LOCAL_VM if vm.host == host else Origin.REMOTE_VM
        for vr in self.topo.vrs.values():
            if vr.mac == mac:
                return Origin.LOCAL_VR if vr.host == host else Origin.REMOTE_VR
        return Origin.REMOTE_VM

    def _vr_by_mac(self, mac: str) -> Optional[net_model.Vr]:
        for vr in self.topo.vrs.values():
            if vr.mac == mac:
                return vr
        return None

    def _latency(self, src: str, dst: str) -> float:
        def one(end):
            if end in self.topo.hosts:
                return self.topo.hosts[end].spec.latency_s
            return self.topo.externals[end].latency_s
        return one(src) + one(dst)

    # ------------------------------------------------------------------
    # ARP plumbing

    def inject_on_vsi(self, host: str, tenant: str, frame: ArpFrame,
                      ingress: str) -> None:
        """Frame enters the per-(host, tenant) switch from `ingress` port."""
        vsi = self.vsi(host, tenant)
        local_vr = self.topo.local_vr(host, tenant)
        if (self.topo.mode == "eywa" and local_vr is not None
                and ingress == local_vr.vr_id):
            # frame leaving the VR traverses the vPort: agent sees it
            agent = self.topo.agent_for(host, tenant)
            agent_mod.observe(agent, frame, Direction.OUTBOUND,
                              Origin.LOCAL_VR, self.now)
        for port in vsi.forward(frame.l2_src, frame.l2_dst, ingress):
            if port == VTEP_PORT:
                self.vtep_out(host, tenant, frame)
            else:
                self._deliver(host, tenant, port, frame)

    def _deliver(self, host: str, tenant: str, port: str, frame: ArpFrame) -> None:
        inst = self._instance_at(host, tenant, port)
        if inst is None:
            return
        now = self.now
        if isinstance(inst, net_model.Vr):
            if self.topo.mode == "eywa":
                agent = self.topo.agent_for(host, tenant)
                agent_mod.observe(agent, frame, Direction.INBOUND,
                                  self._mac_origin(frame.sender_mac, host), now)
            reply = self.vr_states[inst.vr_id].handle_arp(frame, now)
            if reply is not None:
                self.core.schedule(
                    0.0, lambda r=reply, h=host, t=tenant, i=inst.vr_id:
                    self.inject_on_vsi(h, t, r, i), "vr-arp-reply")
            self._note_vr_resolution(inst.vr_id)
            return
        # VM port
        stack = self.stacks[inst.vm_id]
        if frame.op is ArpOp.REPLY and (
                frame.target_mac == stack.mac or frame.l2_dst == stack.mac):
            if frame.sender_ip == stack.gateway_ip:
                key = (inst.vm_id, frame.seq)
                self.reply_counts[key] = self.reply_counts.get(key, 0) + 1
        reply = stack.on_arp(frame, now)
        if reply is not None:
            self.core.schedule(
                0.0, lambda r=reply, h=host, t=tenant, i=inst.vm_id:
                self.inject_on_vsi(h, t, r, i), "vm-arp-reply")
        self._refresh_binding(inst.vm_id)

    def vtep_out(self, host: str, tenant: str, frame: ArpFrame) -> None:
        """Outbound: frame hits the VTEP; the agent decides in eywa mode."""
        vni = self.topo.vni_of(tenant)
        vtep = self.vteps[host]
        if self.topo.mode != "eywa":
            self._tunnel(host, tenant, frame, vtep.lookup(vni, frame.l2_dst),
                         rule_id="baseline")
            return
        agent = self.topo.agent_for(host, tenant)
        now = self.now
        kind = classify(frame, agent.gateway_ip)
        view = agent_mod.LocalView(
            is_target_local=frame.target_ip in agent.local_vms,
            is_sender_local=self._mac_origin(frame.sender_mac, host)
            in (Origin.LOCAL_VM, Origin.LOCAL_VR),
            cache_hit=(frame.target_ip != agent.gateway_ip
                       and agent.cache_lookup(frame.target_ip, now) is not None),
        )
        agent_mod.observe(agent, frame, Direction.OUTBOUND,
                          self._mac_origin(frame.sender_mac, host), now)
        decision = agent_mod.decide(agent, kind, Direction.OUTBOUND, frame, view)
        agent.count(decision.rule_id)
        tunneled = False
        if decision.action is Action.PASS:
            tunneled = frame.is_broadcast
            self._tunnel(host, tenant, frame, vtep.lookup(vni, frame.l2_dst),
                         rule_id=decision.rule_id)
        elif decision.action is Action.PROXY:
            reply = agent_mod.synthesize_proxy_reply(agent, frame, now)
            if reply is None:
                agent.anomaly(f"proxy {decision.rule_id}: stale resolution "
                              f"for {frame.target_ip}")
            else:
                self.core.schedule(
                    0.0, lambda r=reply, h=host, t=tenant:
                    self.inject_on_vsi(h, t, r, VTEP_PORT), "proxy-reply")
        elif decision.action is Action.NOT_APPLICABLE:
            self.runtime_na += 1
            agent.anomaly(f"runtime N/A rule {decision.rule_id}")
        self.arp_events.append(ArpEvent(
            now, host, "out", kind.value, decision.rule_id,
            decision.action.value, frame.sender_ip, frame.target_ip,
            tunneled_broadcast=tunneled))

    def _tunnel(self, src_host: str, tenant: str, frame: ArpFrame, dst: str,
                rule_id: str) -> None:
        vni = self.topo.vni_of(tenant)
        if frame.is_garp:
            if self.topo.mode == "eywa":
                self.tunneled_garp += 1
            # baselines tunnel GARPs freely (takeover announcements)
        if dst == frames.HEAD_END_REPLICATION:
            targets = [h for h in self.topo.tenant_hosts(tenant) if h != src_host]
        else:
            targets = [dst] if dst != src_host else []
        for target in targets:
            tframe = frames.encapsulate(frame, vni, src_host, target,
                                        tenant_vni=vni)
            self.core.schedule(
                self._latency(src_host, target),
                lambda tf=tframe, t=tenant: self.tunnel_rx(t, tf), "tunnel")

    def tunnel_rx(self, tenant: str, tframe: frames.TunnelFrame) -> None:
        host = tframe.dst
        if host not in self.topo.hosts or not self.topo.hosts[host].alive:
            return
        frame = frames.decapsulate(tframe)
        vtep = self.vteps[host]
        vtep.learn(tframe.vni, frame.l2_src, tframe.src_vtep_host)
        if self.topo.mode != "eywa":
            self.inject_on_vsi(host, tenant, frame, VTEP_PORT)
            return
        agent = self.topo.agent_for(host, tenant)
        now = self.now
        kind = classify(frame, agent.gateway_ip)
        view = agent_mod.LocalView(
            is_target_local=(frame.target_ip in agent.local_vms
                             or self._is_local_vm_mac(host, frame.target_mac)),
            is_sender_local=False,
            cache_hit=agent.cache_lookup(frame.target_ip, now) is not None,
        )
        agent_mod.observe(agent, frame, Direction.INBOUND,
                          self._mac_origin(frame.sender_mac, host), now)
        decision = agent_mod.decide(agent, kind, Direction.INBOUND, frame, view)
        agent.count(decision.rule_id)
        effective = decision.action
        if decision.action is Action.PASS_FIRST_FILTER_REST:
            key = (frame.sender_ip, frame.target_mac, frame.seq)
            effective = (Action.PASS if agent.flux_admit(key, now)
                         else Action.FILTER)
        if effective is Action.PASS:
            self.inject_on_vsi(host, tenant, frame, VTEP_PORT)
        elif effective is Action.PROXY:
            reply = agent_mod.synthesize_proxy_reply(agent, frame, now)
            if reply is None:
                agent.anomaly(f"proxy {decision.rule_id}: stale resolution "
                              f"for {frame.target_ip}")
            else:
                back = frames.encapsulate(reply, tframe.vni, host,
                                          tframe.src_vtep_host,
                                          tenant_vni=tframe.vni)
                self.core.schedule(
                    self._latency(host, tframe.src_vtep_host),
                    lambda tf=back, t=tenant: self.tunnel_rx(t, tf), "proxy-back")
        elif effective is Action.NOT_APPLICABLE:
            self.runtime_na += 1
            agent.anomaly(f"runtime N/A rule {decision.rule_id}")
        self.arp_events.append(ArpEvent(
            now, host, "in", kind.value, decision.rule_id,
            effective.value, frame.sender_ip, frame.target_ip))

    def _is_local_vm_mac(self, host: str, mac: str) -> bool:
        for vm in self.topo.vms.values():
            if vm.mac == mac and vm.host == host and vm.alive:
                return True
        return False

    # ------------------------------------------------------------------
    # resolution driving and flow bindings

    @property
    def now(self) -> float:
        return self.core.clock.now

    def _refresh_binding(self, vm_id: str) -> None:
        stack = self.stacks[vm_id]
        mac = stack.lookup(stack.gateway_ip, self.now)
        if mac is not None and mac != self.gateway_binding.get(vm_id):
            self.gateway_binding[vm_id] = mac
            self._mark_dirty()
            self._recompute_paths()
            self._schedule_gateway_expiry(vm_id)
        elif mac is not None:
            self._schedule_gateway_expiry(vm_id)

    def _schedule_gateway_expiry(self, vm_id: str) -> None:
        stack = self.stacks[vm_id]
        expiry = stack.gateway_entry_expiry()
        if expiry is None:
            return
        if self._expiry_scheduled.get(vm_id) == expiry:
            return
        self._expiry_scheduled[vm_id] = expiry
        delay = max(0.0, expiry - self.now) + 1e-6
        self.core.schedule(
            delay, lambda v=vm_id, e=expiry: self._on_gateway_expiry(v, e),
            "gw-expiry")

    def _on_gateway_expiry(self, vm_id: str, expiry: float) -> None:
        stack = self.stacks.get(vm_id)
        if stack is None or stack.gateway_entry_expiry() != expiry:
            return  # refreshed meanwhile; a newer check is scheduled
        vm = self.topo.vms.get(vm_id)
        if vm is None or not vm.alive:
            return
        if any(f.spec.src == vm_id for f in self.flows.values()):
            self._drive_resolution(vm_id)

    def _drive_resolution(self, vm_id: str) -> None:
        """Issue/retry gateway resolution for a VM until it binds."""
        vm = self.topo.vms.get(vm_id)
        if vm is None or not vm.alive:
            return
        stack = self.stacks[vm_id]
        result = stack.resolve(stack.gateway_ip, self.now)
        if isinstance(result, ArpFrame):
            self.inject_on_vsi(vm.host, vm.tenant, result, vm_id)
            self.core.schedule(self.arp_retry,
                               lambda v=vm_id: self._retry_resolution(v),
                               "arp-retry")

    def _retry_resolution(self, vm_id: str) -> None:
        stack = self.stacks.get(vm_id)
        if stack is None:
            return
        if stack.lookup(stack.gateway_ip, self.now) is not None:
            return
        if not any(f.spec.src == vm_id for f in self.flows.values()):
            return
        self._drive_resolution(vm_id)

    def _note_vr_resolution(self, vr_id: str) -> None:
        """A VR just saw ARP traffic; inbound flows gated on it may unblock."""
        self._mark_dirty()

    def _dnat_vr_for(self, vm_id: str) -> Optional[net_model.Vr]:
        for vr in sorted(self.topo.vrs.values(), key=lambda v: v.vr_id):
            if not vr.alive:
                continue
            for members in vr.spec.lb_members.values():
                if vm_id in members:
                    return vr
        return None

    def _flow_path(self, rec: FlowRecord) -> Optional[List]:
        spec = rec.spec
        topo = self.topo
        if spec.kind in ("outbound", "eastwest"):
            vm = topo.vms.get(spec.src)
            if vm is None or not vm.alive or not topo.hosts[vm.host].alive:
                return None
            mac = self.gateway_binding.get(spec.src)
            if mac is None:
                return None
            gw = self._vr_by_mac(mac)
            if gw is None or not gw.alive or not topo.hosts[gw.host].alive:
                return None
            path = [("nic", vm.vm_id, "tx")]
            if gw.host != vm.host:
                path += [("host", vm.host, "up"), ("host", gw.host, "down")]
            path.append(("vr", gw.vr_id, "up"))
            if spec.kind == "outbound":
                if spec.dst not in topo.externals:
                    return None
                path += [("host", gw.host, "up"), ("ext", spec.dst, "down")]
                return path
            dst_vm = topo.vms.get(spec.dst)
            if dst_vm is None or not dst_vm.alive:
                return None
            dvr = self._dnat_vr_for(spec.dst)
            if dvr is None or not topo.hosts[dvr.host].alive:
                return None
            if dvr.host != gw.host:
                path += [("host", gw.host, "up"), ("host", dvr.host, "down")]
            path.append(("vr", dvr.vr_id, "down"))
            if dvr.host != dst_vm.host:
                path += [("host", dvr.host, "up"), ("host", dst_vm.host, "down")]
            path.append(("nic", dst_vm.vm_id, "rx"))
            return path
        # inbound: external -> DNAT VR -> VM
        dst_vm = topo.vms.get(spec.dst)
        if dst_vm is None or not dst_vm.alive:
            return None
        dvr = self._dnat_vr_for(spec.dst)
        if dvr is None or not topo.hosts[dvr.host].alive:
            return None
        if self.vr_states[dvr.vr_id].resolver.lookup(
                dst_vm.private_ip, self.now) is None:
            return None
        path = [("ext", spec.src, "up"), ("host", dvr.host, "down"),
                ("vr", dvr.vr_id, "down")]
        if dvr.host != dst_vm.host:
            path += [("host", dvr.host, "up"), ("host", dst_vm.host, "down")]
        path.append(("nic", dst_vm.vm_id, "rx"))
        return path

    def _links(self) -> Dict:
        caps: Dict = {}
        for host in self.topo.hosts.values():
            for d in ("up", "down"):
                caps[("host", host.host_id, d)] = host.spec.capacity_bps
        for ext in self.topo.externals.values():
            for d in ("up", "down"):
                caps[("ext", ext.ext_id, d)] = ext.capacity_bps
        for vm in self.topo.vms.values():
            for d in ("tx", "rx"):
                caps[("nic", vm.vm_id, d)] = vm.nic_capacity_bps
        for vr in self.topo.vrs.values():
            for d in ("up", "down"):
                caps[("vr", vr.vr_id, d)] = vr.port_capacity_bps
        return caps

    def _mark_dirty(self) -> None:
        self._dirty = True

    def _recompute_paths(self) -> None:
        now = self.now
        for rec in self.flows.values():
            path = self._flow_path(rec)
            new = path or []
            if new != rec.path:
                rec.path = new
                rec.history.append((now, list(new)))
            rec.active = bool(path)
            if (not rec.active and rec.spec.kind == "inbound"):
                # blocked on the DNAT VR's own resolution (e.g. TTL expiry):
                # keep driving it; the resolver rate-limits retries itself
                dvr = self._dnat_vr_for(rec.spec.dst)
                if dvr is not None and self.topo.hosts[dvr.host].alive:
                    self._drive_vr_resolution(dvr.vr_id, rec.spec.dst)
        self._dirty = True

    def _solve(self) -> None:
        self._recompute_paths()
        demands = [simcore.FlowDemand(fid, rec.path, rec.spec.demand_bps)
                   for fid, rec in sorted(self.flows.items()) if rec.active]
        rates = simcore.solve_flows(demands, self._links())
        for fid, rec in self.flows.items():
            rec.rate_bps = rates.get(fid, 0.0)
        self._rates = {fid: rec.rate_bps for fid, rec in self.flows.items()}
        self._dirty = False

    # ------------------------------------------------------------------
    # timeline actions

    def start_flow(self, spec: FlowSpec) -> None:
        if spec.flow_id in self.flows:
            raise ValidationError(f"duplicate flow id {spec.flow_id}")
        rec = FlowRecord(spec=spec)
        self.flows[spec.flow_id] = rec
        if spec.kind in ("outbound", "eastwest"):
            if spec.src not in self.topo.vms:
                raise ValidationError(f"flow {spec.flow_id}: unknown vm {spec.src}")
            self._drive_resolution(spec.src)
        else:
            if spec.src not in self.topo.externals:
                raise ValidationError(
                    f"flow {spec.flow_id}: unknown external {spec.src}")
            dvr = self._dnat_vr_for(spec.dst)
            if dvr is not None:
                self._drive_vr_resolution(dvr.vr_id, spec.dst)
        self._mark_dirty()

    def _drive_vr_resolution(self, vr_id: str, dst_vm_id: str) -> None:
        vr = self.topo.vrs.get(vr_id)
        dst = self.topo.vms.get(dst_vm_id)
        if vr is None or dst is None or not vr.alive:
            return
        state = self.vr_states[vr_id]
        result = state.resolver.resolve(dst.private_ip, self.now)
        if isinstance(result, ArpFrame):
            self.inject_on_vsi(vr.host, vr.tenant, result, vr_id)
            self.core.schedule(
                self.arp_retry,
                lambda v=vr_id, d=dst_vm_id: self._retry_vr_resolution(v, d),
                "vr-arp-retry")

    def _retry_vr_resolution(self, vr_id: str, dst_vm_id: str) -> None:
        state = self.vr_states.get(vr_id)
        dst = self.topo.vms.get(dst_vm_id)
        if state is None or dst is None:
            return
        if state.resolver.lookup(dst.private_ip, self.now) is not None:
            self._mark_dirty()
            return
        self._drive_vr_resolution(vr_id, dst_vm_id)

    def stop_flow(self, flow_id: str) -> None:
        self.flows.pop(flow_id, None)
        self._mark_dirty()

    def kill_vr(self, vr_id: str) -> None:
        vr = self.topo.vrs.get(vr_id)
        if vr is None:
            raise ValidationError(f"unknown vr {vr_id}")
        vr.alive = False
        self.vsi(vr.host, vr.tenant).detach(vr_id)
        for groups in self.vrrp_groups.values():
            for group in groups:
                group.mark_dead(vr_id)
        self._mark_dirty()

    def start_vr(self, spec: VrSpec) -> None:
        vr, garps = net_model.place_instance(self.topo, spec, spec.host)
        self._register_vr(vr)
        for garp in garps:
            self.inject_on_vsi(vr.host, vr.tenant, garp, vr.vr_id)
        self._mark_dirty()

    def add_vm(self, spec: VmSpec) -> None:
        vm, _ = net_model.place_instance(self.topo, spec, spec.host)
        self._register_vm(vm)
        self._mark_dirty()

    def remove_vm(self, vm_id: str) -> None:
        vm = self.topo.vms.get(vm_id)
        if vm is None:
            raise ValidationError(f"unknown vm {vm_id}")
        vm.alive = False
        self.vsi(vm.host, vm.tenant).detach(vm_id)
        agent = self.topo.agent_for(vm.host, vm.tenant)
        agent.vm_detached(vm.private_ip)
        for fid in [fid for fid, rec in self.flows.items()
                    if rec.spec.src == vm_id or rec.spec.dst == vm_id]:
            del self.flows[fid]
        self._mark_dirty()

    def kill_host(self, host_id: str) -> None:
        host = self.topo.hosts.get(host_id)
        if host is None:
            raise ValidationError(f"unknown host {host_id}")
        host.alive = False
        for vr in self.topo.vrs.values():
            if vr.host == host_id and vr.alive:
                vr.alive = False
                self.vsi(host_id, vr.tenant).detach(vr.vr_id)
                for groups in self.vrrp_groups.values():
                    for group in groups:
                        group.mark_dead(vr.vr_id)
        for vm in self.topo.vms.values():
            if vm.host == host_id and vm.alive:
                vm.alive = False
                self.vsi(host_id, vm.tenant).detach(vm.vm_id)
        self._mark_dirty()

    def migrate_vm(self, vm_id: str, dst_host: str) -> None:
        vm = self.topo.vms[vm_id]
        self.vsi(vm.host, vm.tenant).detach(vm_id)
        dataplane.migrate_vm(self.topo, vm_id, dst_host)
        self.vsi(dst_host, vm.tenant).attach(vm_id)
        self._mark_dirty()
        self._recompute_paths()

    # ------------------------------------------------------------------
    # periodic machinery

    def _agent_tick(self) -> None:
        interval = self.topo.spec.agent_config.health_interval
        now = self.now
        for (host, tenant), agent in sorted(self.topo.agents.items()):
            if not self.topo.hosts[host].alive:
                continue
            probes, transition = agent_mod.monitor_tick(agent, now)
            if transition is not None:
                self.mode_transitions.append(
                    (now, host, tenant, transition.value))
                self._mark_dirty()
            for probe in probes:
                self._deliver_probe(host, tenant, agent, probe)
        self.core.schedule(interval, self._agent_tick, "agent-tick")

    def _deliver_probe(self, host: str, tenant: str, agent: AgentState,
                       probe: ArpFrame) -> None:
        """Probes go straight to the local instance, off the broadcast path."""
        now = self.now
        if probe.target_ip == agent.gateway_ip:
            vr = self.topo.local_vr(host, tenant)
            if vr is None or not vr.alive:
                return
            reply = self.vr_states[vr.vr_id].handle_arp(probe, now)
            if reply is not None:
                agent_mod.observe(agent, reply, Direction.INBOUND,
                                  Origin.LOCAL_VR, now)
            return
        for vm in self.topo.local_vms(host, tenant):
            if vm.private_ip == probe.target_ip:
                reply = self.stacks[vm.vm_id].on_arp(probe, now)
                if reply is not None:
                    agent_mod.observe(agent, reply, Direction.INBOUND,
                                      Origin.LOCAL_VM, now)
                return

    def _vrrp_tick(self) -> None:
        now = self.now
        for tenant in sorted(self.vrrp_groups):
            for group in self.vrrp_groups[tenant]:
                sent, promoted = baselines.vrrp_tick(group, now)
                if promoted is not None:
                    self._vrrp_takeover(tenant, group, promoted)
        self.core.schedule(1.0, self._vrrp_tick, "vrrp-tick")

    def _vrrp_takeover(self, tenant: str, group: baselines.VrrpGroup,
                       vr_id: str) -> None:
        vr = self.topo.vrs[vr_id]
        state = self.vr_states[vr_id]
        state.owned_ips.add(group.virtual_ip)
        self.vrrp_promotions.append({
            "tenant": tenant, "vrid": group.vrid,
            "virtual_ip": group.virtual_ip, "time_s": self.now,
            "new_master": vr_id})
        garp = frames.make_garp(group.virtual_ip, vr.mac, tenant=tenant)
        self.inject_on_vsi(vr.host, tenant, garp, vr_id)
        self._mark_dirty()

    def _sample_tick(self) -> None:
        now = self.now
        dt = now - self._last_account
        if dt > 0:
            bytes_per_link = simcore.account(
                self._rates,
                {fid: rec.path for fid, rec in self.flows.items()},
                dt)
            for link, nbytes in bytes_per_link.items():
                self.link_bytes[link] = self.link_bytes.get(link, 0.0) + nbytes
            self._update_qos(bytes_per_link, dt)
        self._last_account = now
        if self._dirty:
            self._solve()
        self._record_sample(now)
        self.core.schedule(self.sampling_interval, self._sample_tick, "sample")

    def _update_qos(self, bytes_per_link: Dict, dt: float) -> None:
        for vr in self.topo.vrs.values():
            through = (bytes_per_link.get(("vr", vr.vr_id, "up"), 0.0)
                       + bytes_per_link.get(("vr", vr.vr_id, "down"), 0.0))
            agent = self.topo.agents.get((vr.host, vr.tenant))
            if agent is not None:
                agent_mod.update_qos(agent, through, dt, vr.port_capacity_bps)

    def _record_sample(self, now: float) -> None:
        row: Dict[Tuple[str, str], List[float]] = {}

        def add(key, tx=0.0, rx=0.0):
            cur = row.setdefault(key, [0.0, 0.0])
            cur[0] += tx
            cur[1] += rx

        for vm in self.topo.vms.values():
            add(("vm", vm.vm_id))
        for vr in self.topo.vrs.values():
            add(("vr", vr.vr_id))
        for host in self.topo.hosts.values():
            add(("host", host.host_id))
        for ext in self.topo.externals.values():
            add(("external", ext.ext_id))

        for fid, rec in self.flows.items():
            rate = rec.rate_bps
            if not rec.active or rate <= 0:
                continue
            for link in rec.path:
                kind, ident, d = link
                if kind == "nic":
                    add(("vm", ident), tx=rate if d == "tx" else 0.0,
                        rx=rate if d == "rx" else 0.0)
                elif kind == "vr":
                    add(("vr", ident), tx=rate if d == "up" else 0.0,
                        rx=rate if d == "down" else 0.0)
                elif kind == "host":
                    add(("host", ident), tx=rate if d == "up" else 0.0,
                        rx=rate if d == "down" else 0.0)
                elif kind == "ext":
                    add(("external", ident), tx=rate if d == "up" else 0.0,
                        rx=rate if d == "down" else 0.0)

        for (etype, eid), (tx, rx) in sorted(row.items()):
            self.samples.append({
                "time_s": now, "entity_type": etype, "entity_id": eid,
                "tx_bps": tx, "rx_bps": rx})

    # ------------------------------------------------------------------

    def run(self, duration_s: float,
            timeline: Optional[List[Tuple[float, str, dict]]] = None) -> None:
        """Execute the timeline and periodic machinery until duration."""
        if self.topo.mode == "eywa":
            self.core.schedule(
                self.topo.spec.agent_config.health_interval,
                self._agent_tick, "agent-tick")
        if self.topo.mode == "mvrrp":
            self.core.schedule(1.0, self._vrrp_tick, "vrrp-tick")
        self.core.schedule(self.sampling_interval, self._sample_tick, "sample")
        for time_s, action, params in (timeline or []):
            self.core.schedule_at(
                time_s, lambda a=action, p=params: self._apply(a, p), action)
        self.core.run_until(duration_s)

    def _apply(self, action: str, params: dict) -> None:
        if action == "start_flow":
            self.start_flow(FlowSpec(**params))
        elif action == "stop_flow":
            self.stop_flow(params["flow_id"])
        elif action == "kill_vr":
            self.kill_vr(params["vr_id"])
        elif action == "start_vr":
            self.start_vr(VrSpec(**params))
        elif action == "add_vm":
            self.add_vm(VmSpec(**params))
        elif action == "remove_vm":
            self.remove_vm(params["vm_id"])
        elif action == "kill_host":
            self.kill_host(params["host_id"])
        elif action == "migrate_vm":
            self.migrate_vm(params["vm_id"], params["dst_host"])
        else:
            raise ValidationError(f"unknown timeline action {action!r}")
        self._recompute_paths()

    # -- derived telemetry ------------------------------------------------

    def rule_counters(self) -> Dict[str, int]:
        total: Dict[str, int] = {}
        for agent in self.topo.agents.values():
            for rule, n in agent.counters.items():
                total[rule] = total.get(rule, 0) + n
        return total

    def anomaly_list(self) -> List[str]:
        out = []
        for (host, tenant), agent in sorted(self.topo.agents.items()):
            out.extend(f"{host}/{tenant}: {msg}" for msg in agent.anomalies)
        return out

    def max_gateway_replies(self) -> int:
        return max(self.reply_counts.values(), default=0)

    def tunneled_broadcast_rules(self) -> Dict[str, int]:
        out: Dict[str, int] = {}
        for ev in self.arp_events:
            if ev.tunneled_broadcast:
                out[ev.rule_id] = out.get(ev.rule_id, 0) + 1
        return out
