"""Instance behavior: VM resolver stacks, VR NAT/LB, learning switches, VTEPs.

The rule engine only ever touches ARP; data frames bypass it entirely.  NAT
and LB are exercised both at frame granularity (these operations) and as
bookkeeping for the fluid flows driven by the simulation engine.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Set, Tuple, Union

from .frames import (
    BROADCAST_MAC,
    ArpFrame,
    ArpOp,
    DataFrame,
    HEAD_END_REPLICATION,
    make_arp_reply,
    make_arp_request,
)
from .net_model import CapacityError, Topology, ValidationError

VTEP_PORT = "__vtep__"

SNAT_PORT_BASE = 10000
SNAT_PORT_LIMIT = 60000


@dataclass
class CacheSlot:
    mac: str
    learned_at: float
    ttl: float

    def expired(self, now: float) -> bool:
        return now >= self.learned_at + self.ttl


@dataclass
class Pending:
    seq: int
    next_retry: float


class VmStack:
    """A VM's ARP resolver and cache.

    At most one outstanding request per target; retries re-broadcast with a
    fresh sequence number every `arp_retry` seconds until answered.
    """

    def __init__(self, private_ip: str, mac: str, gateway_ip: str,
                 tenant: str, cache_ttl: float = 30.0, arp_retry: float = 1.0):
        self.private_ip = private_ip
        self.mac = mac
        self.gateway_ip = gateway_ip
        self.tenant = tenant
        self.cache_ttl = cache_ttl
        self.arp_retry = arp_retry
        self.cache: Dict[str, CacheSlot] = {}
        self.pending: Dict[str, Pending] = {}
        self._seq = 0

    def lookup(self, target_ip: str, now: float) -> Optional[str]:
        slot = self.cache.get(target_ip)
        if slot is not None and not slot.expired(now):
            return slot.mac
        return None

    def resolve(self, target_ip: str, now: float) -> Union[str, ArpFrame, None]:
        """Cached MAC, a fresh broadcast request, or None if one is in flight."""
        mac = self.lookup(target_ip, now)
        if mac is not None:
            return mac
        pend = self.pending.get(target_ip)
        if pend is not None and now < pend.next_retry:
            return None
        self._seq += 1
        self.pending[target_ip] = Pending(seq=self._seq,
                                          next_retry=now + self.arp_retry)
        return make_arp_request(self.private_ip, self.mac, target_ip,
                                tenant=self.tenant, seq=self._seq)

    def on_arp(self, frame: ArpFrame, now: float) -> Optional[ArpFrame]:
        """Handle an ARP frame delivered to this VM's port.

        Answers requests for our own IP; learns from replies addressed to us
        and from GARPs (which refresh existing entries unconditionally).
        """
        if frame.op is ArpOp.REQUEST:
            if frame.is_garp:
                if frame.sender_ip in self.cache or frame.sender_ip == self.gateway_ip:
                    self.cache[frame.sender_ip] = CacheSlot(
                        frame.sender_mac, now, self.cache_ttl)
                    self.pending.pop(frame.sender_ip, None)
                return None
            if frame.target_ip == self.private_ip and frame.sender_mac != self.mac:
                return make_arp_reply(frame, self.mac)
            return None
        if frame.target_mac == self.mac or frame.l2_dst == self.mac:
            self.cache[frame.sender_ip] = CacheSlot(
                frame.sender_mac, now, self.cache_ttl)
            self.pending.pop(frame.sender_ip, None)
        return None

    def gateway_entry_expiry(self) -> Optional[float]:
        slot = self.cache.get(self.gateway_ip)
        if slot is None:
            return None
        return slot.learned_at + slot.ttl


@dataclass
class SnatMapping:
    inner: Tuple[str, int, str, int]
    public: Tuple[str, int, str, int]


class VrState:
    """Virtual router: shared-gateway ARP responder, SNAT, DNAT with L4 LB."""

    def __init__(self, gateway_ip: str, mac: str, public_ip: str, tenant: str,
                 lb_members: Optional[Dict[int, List[str]]] = None,
                 cache_ttl: float = 30.0, arp_retry: float = 1.0):
        self.gateway_ip = gateway_ip
        self.mac = mac
        self.public_ip = public_ip
        self.tenant = tenant
        self.lb_members = dict(lb_members or {})
        self.snat_by_inner: Dict[Tuple[str, int, str, int], SnatMapping] = {}
        self.snat_by_public: Dict[int, SnatMapping] = {}
        self._free_ports: List[int] = []
        self._next_port = SNAT_PORT_BASE
        self.rr_cursor: Dict[int, int] = {}
        self.sticky: Dict[Tuple[str, int, int], str] = {}
        self.conflict_count = 0
        self.counters: Dict[str, int] = {}
        # VRs resolve VM MACs like any host: small cache + pending retries.
        self.resolver = VmStack(gateway_ip, mac, gateway_ip, tenant,
                                cache_ttl=cache_ttl, arp_retry=arp_retry)

    # -- ARP --------------------------------------------------------------

    def handle_arp(self, frame: ArpFrame, now: float) -> Optional[ArpFrame]:
        """Reply iff the request targets the shared gateway IP."""
        if frame.op is ArpOp.REQUEST:
            if frame.is_garp:
                if (frame.sender_ip == self.gateway_ip
                        and frame.sender_mac != self.mac):
                    self.conflict_count += 1
                return None
            if frame.target_ip == self.gateway_ip and frame.sender_mac != self.mac:
                return make_arp_reply(frame, self.mac)
            return None
        return self.resolver.on_arp(frame, now)

    # -- SNAT -------------------------------------------------------------

    def _allocate_port(self) -> int:
        if self._free_ports:
            return self._free_ports.pop(0)
        if self._next_port >= SNAT_PORT_LIMIT:
            raise CapacityError(f"vr {self.public_ip}: SNAT port pool exhausted")
        port = self._next_port
        self._next_port += 1
        return port

    def snat_forward(self, frame: DataFrame) -> DataFrame:
        """Rewrite an outbound frame's source to (public_ip, allocated port).

        Mappings are bijective while live; repeated frames of one flow reuse
        the existing mapping.  Ports are allocated lowest-free-first.
        """
        inner = frame.five_tuple
        mapping = self.snat_by_inner.get(inner)
        if mapping is None:
            port = self._allocate_port()
            mapping = SnatMapping(
                inner=inner,
                public=(self.public_ip, port, frame.dst_ip, frame.dst_port))
            self.snat_by_inner[inner] = mapping
            self.snat_by_public[port] = mapping
        self.counters["snat"] = self.counters.get("snat", 0) + 1
        return replace(frame, src_ip=self.public_ip,
                       src_port=mapping.public[1], l2_src=self.mac)

    def snat_reverse(self, frame: DataFrame) -> Optional[DataFrame]:
        """Translate a reply to a public 5-tuple back to the inner flow."""
        mapping = self.snat_by_public.get(frame.dst_port)
        if mapping is None or frame.dst_ip != self.public_ip:
            self.counters["snat_miss"] = self.counters.get("snat_miss", 0) + 1
            return None
        src_ip, src_port, _, _ = mapping.inner
        return replace(frame, dst_ip=src_ip, dst_port=src_port, l2_src=self.mac)

    def release_snat(self, inner: Tuple[str, int, str, int]) -> None:
        mapping = self.snat_by_inner.pop(inner, None)
        if mapping is not None:
            port = mapping.public[1]
            del self.snat_by_public[port]
            self._free_ports.append(port)
            self._free_ports.sort()

    # -- DNAT / L4 LB -----------------------------------------------------

    def dnat_select(self, public_port: int,
                    client: Tuple[str, int]) -> Optional[str]:
        """Pick the member VM for a connection; new connections round-robin,
        established ones stick to their member."""
        members = self.lb_members.get(public_port)
        if not members:
            self.counters["dnat_drop"] = self.counters.get("dnat_drop", 0) + 1
            return None
        key = (client[0], client[1], public_port)
        if key in self.sticky:
            return self.sticky[key]
        cursor = self.rr_cursor.get(public_port, 0)
        member = members[cursor % len(members)]
        self.rr_cursor[public_port] = cursor + 1
        self.sticky[key] = member
        self.counters["dnat"] = self.counters.get("dnat", 0) + 1
        return member

    def dnat_lb_forward(self, frame: DataFrame,
                        member_ips: Dict[str, str]) -> Optional[DataFrame]:
        """Rewrite an inbound public frame toward its LB member."""
        if frame.dst_ip != self.public_ip:
            return None
        member = self.dnat_select(frame.dst_port, (frame.src_ip, frame.src_port))
        if member is None or member not in member_ips:
            return None
        return replace(frame, dst_ip=member_ips[member], l2_src=self.mac)


class VsiState:
    """Per-(host, tenant) learning switch; STP-free, floods unknown unicast."""

    def __init__(self):
        self.table: Dict[str, str] = {}  # mac -> port (instance id or VTEP_PORT)
        self.ports: Set[str] = {VTEP_PORT}

    def attach(self, port: str) -> None:
        self.ports.add(port)

    def detach(self, port: str) -> None:
        self.ports.discard(port)
        self.table = {m: p for m, p in self.table.items() if p != port}

    def forward(self, l2_src: str, l2_dst: str, ingress: str) -> List[str]:
        """Learn the source, return egress ports (all-but-ingress on miss)."""
        if ingress in self.ports or ingress == VTEP_PORT:
            self.table[l2_src] = ingress
        if l2_dst != BROADCAST_MAC:
            port = self.table.get(l2_dst)
            if port is not None and port != ingress:
                return [port]
            if port == ingress:
                return []
        return sorted(p for p in self.ports if p != ingress)


class VtepState:
    """Per-host tunnel endpoint: per-VNI flood-and-learn MAC location table."""

    def __init__(self, host: str):
        self.host = host
        self.tables: Dict[int, Dict[str, str]] = {}  # vni -> mac -> remote host

    def learn(self, vni: int, mac: str, remote_host: str) -> None:
        self.tables.setdefault(vni, {})[mac] = remote_host

    def lookup(self, vni: int, mac: str) -> str:
        """Remote host for mac, or the head-end-replication marker."""
        if mac == BROADCAST_MAC:
            return HEAD_END_REPLICATION
        return self.tables.get(vni, {}).get(mac, HEAD_END_REPLICATION)

    def forget_host(self, remote_host: str) -> None:
        for table in self.tables.values():
            stale = [m for m, h in table.items() if h == remote_host]
            for mac in stale:
                del table[mac]


def migrate_vm(topo: Topology, vm_id: str, dst_host: str) -> None:
    """Atomically rehome a VM: detach from its VSi, attach at the destination.

    The VM's own ARP cache is untouched, so its gateway binding survives until
    TTL expiry or refresh (lazy rebinding).  Agent-local VM maps are updated
    on both sides.
    """
    if vm_id not in topo.vms:
        raise ValidationError(f"unknown vm {vm_id}")
    if dst_host not in topo.hosts:
        raise ValidationError(f"unknown host {dst_host}")
    vm = topo.vms[vm_id]
    if not vm.alive:
        raise ValidationError(f"vm {vm_id} is not live")
    for other in topo.local_vms(dst_host, vm.tenant):
        if other.private_ip == vm.private_ip and other.vm_id != vm_id:
            raise ValidationError(
                f"migration of {vm_id} to {dst_host} would duplicate ip "
                f"{vm.private_ip}")
    src_agent = topo.agent_for(vm.host, vm.tenant)
    src_agent.vm_detached(vm.private_ip)
    vm.host = dst_host
    dst_agent = topo.agent_for(dst_host, vm.tenant)
    dst_agent.vm_attached(vm.private_ip, vm.mac)
