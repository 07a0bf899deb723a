"""Domain types and topology construction.

A Topology is the instantiated graph of hosts, external servers, tenants and
their instances, plus one agent per (host, tenant).  Construction validates
all uniqueness invariants up front and names the offending entity on failure.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from . import frames
from .agent import AgentConfig, AgentState, Mode

VNI_SPACE = 1 << 24  # 16,777,216 tenants per deployment

DEFAULT_LINK_CAPACITY = 1e9      # bits/s
DEFAULT_LINK_LATENCY = 0.00005   # 50 us per link traversal


class ValidationError(ValueError):
    """Topology spec violates an invariant; message names the entity."""


class CapacityError(RuntimeError):
    """A bounded resource pool (VNIs, VRIDs, NAT ports) is exhausted."""


class VniRegistry:
    """Lowest-first VNI allocator over [0, 2^24).

    Freed VNIs are reused before the high-water mark advances, so allocation
    is deterministic and the allocated set stays prefix-dense.
    """

    def __init__(self, capacity: int = VNI_SPACE):
        self.capacity = capacity
        self._next = 0
        self._freed: List[int] = []
        self.owners: Dict[int, str] = {}

    @classmethod
    def prefilled(cls, count: int, capacity: int = VNI_SPACE) -> "VniRegistry":
        """Registry behaving as if `count` allocations already happened."""
        reg = cls(capacity)
        reg._next = count
        return reg

    def allocate(self, tenant_id: str) -> int:
        if self._freed:
            vni = heapq.heappop(self._freed)
        elif self._next < self.capacity:
            vni = self._next
            self._next += 1
        else:
            raise CapacityError(
                f"VNI space exhausted: {self.capacity} tenants allocated")
        self.owners[vni] = tenant_id
        return vni

    def release(self, vni: int) -> None:
        if vni not in self.owners:
            raise ValidationError(f"vni {vni} is not allocated")
        del self.owners[vni]
        heapq.heappush(self._freed, vni)


# ---------------------------------------------------------------------------
# Declarative specs

@dataclass
class HostSpec:
    host_id: str
    capacity_bps: float = DEFAULT_LINK_CAPACITY
    latency_s: float = DEFAULT_LINK_LATENCY


@dataclass
class ExternalSpec:
    ext_id: str
    capacity_bps: float = DEFAULT_LINK_CAPACITY
    latency_s: float = DEFAULT_LINK_LATENCY


@dataclass
class VmSpec:
    vm_id: str
    tenant: str
    private_ip: str
    host: str
    mac: Optional[str] = None          # deterministic default assigned at build
    role: str = "generic"              # east-west | north-south | generic
    nic_capacity_bps: Optional[float] = None  # default: host link capacity
    gateway_ip: Optional[str] = None   # default: tenant gateway


@dataclass
class VrSpec:
    vr_id: str
    tenant: str
    host: str
    public_ip: str
    mac: Optional[str] = None
    gateway_ip: Optional[str] = None   # default: tenant shared gateway
    port_capacity_bps: Optional[float] = None  # default: host link capacity
    # public port -> ordered member VM ids (round-robin L4 LB pool)
    lb_members: Dict[int, List[str]] = field(default_factory=dict)


@dataclass
class TenantSpec:
    tenant_id: str
    gateway_ip: str = "10.0.0.1"
    vms: List[VmSpec] = field(default_factory=list)
    vrs: List[VrSpec] = field(default_factory=list)


@dataclass
class TopologySpec:
    hosts: List[HostSpec] = field(default_factory=list)
    externals: List[ExternalSpec] = field(default_factory=list)
    tenants: List[TenantSpec] = field(default_factory=list)
    mode: str = "eywa"  # eywa | mvrrp | single_vr
    agent_config: AgentConfig = field(default_factory=AgentConfig)


# ---------------------------------------------------------------------------
# Instantiated entities

@dataclass
class Vm:
    spec: VmSpec
    mac: str
    gateway_ip: str
    nic_capacity_bps: float
    host: str
    alive: bool = True

    @property
    def vm_id(self):
        return self.spec.vm_id

    @property
    def tenant(self):
        return self.spec.tenant

    @property
    def private_ip(self):
        return self.spec.private_ip


@dataclass
class Vr:
    spec: VrSpec
    mac: str
    gateway_ip: str
    port_capacity_bps: float
    host: str
    alive: bool = True

    @property
    def vr_id(self):
        return self.spec.vr_id

    @property
    def tenant(self):
        return self.spec.tenant

    @property
    def public_ip(self):
        return self.spec.public_ip


@dataclass
class Host:
    spec: HostSpec
    # tenants with at least one resident instance (VSi exists per entry)
    tenants: List[str] = field(default_factory=list)
    alive: bool = True

    @property
    def host_id(self):
        return self.spec.host_id


class Topology:
    """Fully wired star topology: hosts and externals on one physical switch."""

    def __init__(self, spec: TopologySpec):
        self.spec = spec
        self.mode = spec.mode
        self.hosts: Dict[str, Host] = {}
        self.externals: Dict[str, ExternalSpec] = {}
        self.tenants: Dict[str, TenantSpec] = {}
        self.vnis: Dict[str, int] = {}
        self.vms: Dict[str, Vm] = {}
        self.vrs: Dict[str, Vr] = {}
        self.agents: Dict[Tuple[str, str], AgentState] = {}
        self.registry = VniRegistry()
        self._macs: Dict[str, str] = {}  # mac -> owner, global uniqueness
        self._public_ips: Dict[str, str] = {}

    # -- helpers ----------------------------------------------------------

    def vni_of(self, tenant: str) -> int:
        return self.vnis[tenant]

    def gateway_of(self, tenant: str) -> str:
        return self.tenants[tenant].gateway_ip

    def agent_for(self, host: str, tenant: str) -> AgentState:
        key = (host, tenant)
        if key not in self.agents:
            agent = AgentState(
                host=host,
                tenant=tenant,
                gateway_ip=self.gateway_of(tenant),
                agent_mac=_agent_mac(len(self.agents)),
                config=self.spec.agent_config,
            )
            self.agents[key] = agent
            host_obj = self.hosts[host]
            if tenant not in host_obj.tenants:
                host_obj.tenants.append(tenant)
        return self.agents[key]

    def local_vr(self, host: str, tenant: str) -> Optional[Vr]:
        for vr in self.vrs.values():
            if vr.host == host and vr.tenant == tenant and vr.alive:
                return vr
        return None

    def local_vms(self, host: str, tenant: str) -> List[Vm]:
        return [vm for vm in self.vms.values()
                if vm.host == host and vm.tenant == tenant and vm.alive]

    def tenant_hosts(self, tenant: str) -> List[str]:
        """Hosts with at least one live instance of the tenant, sorted."""
        hosts = set()
        for vm in self.vms.values():
            if vm.tenant == tenant and vm.alive:
                hosts.add(vm.host)
        for vr in self.vrs.values():
            if vr.tenant == tenant and vr.alive:
                hosts.add(vr.host)
        return sorted(hosts)

    def _claim_mac(self, mac: str, owner: str) -> None:
        if mac in self._macs:
            raise ValidationError(
                f"duplicate MAC {mac}: {owner} vs {self._macs[mac]}")
        self._macs[mac] = owner


def _vm_mac(vni: int, index: int) -> str:
    return "02:aa:%02x:%02x:%02x:%02x" % (
        (vni >> 8) & 0xFF, vni & 0xFF, (index >> 8) & 0xFF, index & 0xFF)


def _vr_mac(vni: int, index: int) -> str:
    return "02:bb:%02x:%02x:%02x:%02x" % (
        (vni >> 8) & 0xFF, vni & 0xFF, (index >> 8) & 0xFF, index & 0xFF)


def _agent_mac(index: int) -> str:
    return "02:cc:00:00:%02x:%02x" % ((index >> 8) & 0xFF, index & 0xFF)


def allocate_vni(registry: VniRegistry, tenant_id: str) -> int:
    """Allocate the lowest unallocated VNI for a tenant."""
    return registry.allocate(tenant_id)


def build_topology(spec: TopologySpec) -> Topology:
    """Instantiate and validate a topology from its declarative spec.

    Agents start in the mode implied by local VR presence.  Raises
    ValidationError naming the offending entity on any duplicate identity,
    dangling reference, or non-positive capacity.
    """
    if spec.mode not in ("eywa", "mvrrp", "single_vr"):
        raise ValidationError(f"unknown mode {spec.mode!r}")
    topo = Topology(spec)

    for hs in spec.hosts:
        if hs.host_id in topo.hosts:
            raise ValidationError(f"duplicate host id {hs.host_id}")
        if hs.capacity_bps <= 0:
            raise ValidationError(f"host {hs.host_id}: capacity must be positive")
        topo.hosts[hs.host_id] = Host(spec=hs)

    for es in spec.externals:
        if es.ext_id in topo.externals or es.ext_id in topo.hosts:
            raise ValidationError(f"duplicate external id {es.ext_id}")
        if es.capacity_bps <= 0:
            raise ValidationError(f"external {es.ext_id}: capacity must be positive")
        topo.externals[es.ext_id] = es

    for ts in spec.tenants:
        if ts.tenant_id in topo.tenants:
            raise ValidationError(f"duplicate tenant id {ts.tenant_id}")
        topo.tenants[ts.tenant_id] = ts
        topo.vnis[ts.tenant_id] = allocate_vni(topo.registry, ts.tenant_id)

    for ts in spec.tenants:
        for vr in ts.vrs:
            place_instance(topo, vr, vr.host, emit_garp=False)
        for vm in ts.vms:
            place_instance(topo, vm, vm.host, emit_garp=False)

    return topo


def place_instance(topo: Topology, inst_spec, host_id: str,
                   emit_garp: bool = True):
    """Attach a VM or VR to a host's per-tenant VSi.

    Returns (instance, garp_frames).  Placing a VR on an orphan host flips the
    agent to Normal mode; the new VR announces itself with one GARP, which the
    caller must inject on the VSi (suppressed during initial build, where no
    observer exists yet).
    """
    if host_id not in topo.hosts:
        raise ValidationError(f"unknown host {host_id}")
    tenant = inst_spec.tenant
    if tenant not in topo.tenants:
        raise ValidationError(f"unknown tenant {tenant}")
    ts = topo.tenants[tenant]
    vni = topo.vni_of(tenant)
    gateway = inst_spec.gateway_ip or ts.gateway_ip
    garps: List[frames.ArpFrame] = []

    if isinstance(inst_spec, VmSpec):
        if inst_spec.vm_id in topo.vms:
            raise ValidationError(f"duplicate vm id {inst_spec.vm_id}")
        for other in topo.vms.values():
            if other.tenant == tenant and other.private_ip == inst_spec.private_ip:
                raise ValidationError(
                    f"duplicate private ip {inst_spec.private_ip} in tenant "
                    f"{tenant}: {inst_spec.vm_id} vs {other.vm_id}")
        mac = inst_spec.mac or _vm_mac(vni, len(topo.vms))
        topo._claim_mac(mac, inst_spec.vm_id)
        vm = Vm(spec=inst_spec, mac=mac, gateway_ip=gateway,
                nic_capacity_bps=inst_spec.nic_capacity_bps
                or topo.hosts[host_id].spec.capacity_bps,
                host=host_id)
        topo.vms[inst_spec.vm_id] = vm
        agent = topo.agent_for(host_id, tenant)
        agent.vm_attached(vm.private_ip, vm.mac)
        return vm, garps

    if isinstance(inst_spec, VrSpec):
        if inst_spec.vr_id in topo.vrs:
            raise ValidationError(f"duplicate vr id {inst_spec.vr_id}")
        if inst_spec.public_ip in topo._public_ips:
            raise ValidationError(
                f"duplicate public ip {inst_spec.public_ip}: "
                f"{inst_spec.vr_id} vs {topo._public_ips[inst_spec.public_ip]}")
        if topo.local_vr(host_id, tenant) is not None:
            raise ValidationError(
                f"host {host_id} already has a VR for tenant {tenant}")
        mac = inst_spec.mac or _vr_mac(vni, len(topo.vrs))
        topo._claim_mac(mac, inst_spec.vr_id)
        topo._public_ips[inst_spec.public_ip] = inst_spec.vr_id
        vr = Vr(spec=inst_spec, mac=mac, gateway_ip=gateway,
                port_capacity_bps=inst_spec.port_capacity_bps
                or topo.hosts[host_id].spec.capacity_bps,
                host=host_id)
        topo.vrs[inst_spec.vr_id] = vr
        agent = topo.agent_for(host_id, tenant)
        was_orphan = agent.mode is Mode.ORPHAN
        agent.vr_attached(vr.mac)
        if was_orphan and emit_garp:
            garps.append(frames.make_garp(gateway, vr.mac, tenant=tenant))
        return vr, garps

    raise ValidationError(f"unknown instance spec type {type(inst_spec)!r}")


def check_invariants(topo: Topology) -> List[str]:
    """Structural invariants checkable at any event boundary.

    Returns a list of violation messages (empty when healthy).
    """
    problems = []
    for tenant in topo.tenants:
        gw_ips = {vr.gateway_ip for vr in topo.vrs.values()
                  if vr.tenant == tenant}
        if topo.mode != "mvrrp" and len(gw_ips) > 1:
            problems.append(f"tenant {tenant} has multiple gateway IPs: {gw_ips}")
        macs = [vr.mac for vr in topo.vrs.values() if vr.tenant == tenant]
        if len(macs) != len(set(macs)):
            problems.append(f"tenant {tenant} has duplicate VR MACs")
    for (host, tenant), agent in topo.agents.items():
        if topo.mode != "eywa":
            continue
        # Normal mode requires a believed-healthy attached VR; a dead VR may
        # lag detection by up to miss_threshold probe intervals, but the
        # agent's own view must stay consistent at every boundary.
        if agent.mode is Mode.NORMAL and (
                agent.local_vr_mac is None or not agent.vr_health.healthy):
            problems.append(
                f"agent ({host},{tenant}) Normal without healthy local VR")
    return problems
