"""Comparison architectures: single shared VR and MVRRP active-active.

Both share the dataplane but run without the gateway agent: the VTEP is a
plain flood-and-learn tunnel endpoint and ARP crosses it unfiltered.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .net_model import CapacityError, Topology, ValidationError

MAX_VRRP_GROUPS = 255   # per network interface
MAX_VRS_PER_TENANT = 254  # VRID limit

ADVERT_FRAME_BYTES = 100


class VrrpRole(enum.Enum):
    MASTER = "master"
    BACKUP = "backup"


@dataclass
class VrrpMember:
    vr_id: str
    priority: int
    role: VrrpRole = VrrpRole.BACKUP
    alive: bool = True


@dataclass
class VrrpGroup:
    """One VRRP group: a virtual gateway IP owned by exactly one master."""

    vrid: int
    virtual_ip: str
    members: List[VrrpMember]
    advert_interval: float = 1.0
    last_advert_seen: float = 0.0
    advert_bytes: float = 0.0
    promotions: List[Tuple[float, str]] = field(default_factory=list)

    def __post_init__(self):
        if not 1 <= self.vrid <= MAX_VRRP_GROUPS:
            raise ValidationError(f"vrid {self.vrid} outside [1,255]")

    @property
    def dead_interval(self) -> float:
        # 3x advert interval, common practice dead timer
        return 3.0 * self.advert_interval

    def master(self) -> Optional[VrrpMember]:
        for m in self.members:
            if m.role is VrrpRole.MASTER and m.alive:
                return m
        return None

    def mark_dead(self, vr_id: str) -> None:
        for m in self.members:
            if m.vr_id == vr_id:
                m.alive = False


def vrrp_tick(group: VrrpGroup, now: float) -> Tuple[bool, Optional[str]]:
    """One advert interval for a group.

    Returns (advert_sent, promoted_vr_id).  A live master emits one advert;
    with no advert for the dead interval, the highest-priority live backup
    promotes itself (MAC/IP takeover; the caller emits the GARP and remaps the
    virtual IP).
    """
    master = group.master()
    if master is not None:
        group.last_advert_seen = now
        group.advert_bytes += ADVERT_FRAME_BYTES
        return True, None
    if now - group.last_advert_seen < group.dead_interval:
        return False, None
    candidates = [m for m in group.members if m.alive]
    if not candidates:
        return False, None
    best = max(candidates, key=lambda m: (m.priority, m.vr_id))
    best.role = VrrpRole.MASTER
    group.last_advert_seen = now
    group.promotions.append((now, best.vr_id))
    return False, best.vr_id


@dataclass
class GatewayAssignment:
    """VM -> gateway virtual IP, fixed at creation and immutable afterwards."""

    policy: str = "latency"  # round_robin | latency
    table: Dict[str, str] = field(default_factory=dict)
    _rr_cursor: int = 0

    def assigned(self, vm_id: str) -> Optional[str]:
        return self.table.get(vm_id)


def assign_gateway(assignment: GatewayAssignment, topo: Topology,
                   vm_id: str) -> str:
    """Pick a gateway VR virtual IP for a new VM per policy.

    Latency prefers a co-resident VR; round-robin cycles the tenant pool.
    The choice is recorded and never changes for the VM's lifetime.
    """
    if vm_id in assignment.table:
        return assignment.table[vm_id]
    vm = topo.vms[vm_id]
    pool = sorted((vr for vr in topo.vrs.values()
                   if vr.tenant == vm.tenant and vr.alive),
                  key=lambda vr: vr.vr_id)
    if not pool:
        raise ValidationError(f"tenant {vm.tenant}: no VRs to assign")
    if len(pool) > MAX_VRS_PER_TENANT:
        raise CapacityError(
            f"tenant {vm.tenant}: {len(pool)} VRs exceeds the VRID limit of "
            f"{MAX_VRS_PER_TENANT}")
    if assignment.policy == "latency":
        local = [vr for vr in pool if vr.host == vm.host]
        choice = local[0] if local else pool[0]
    elif assignment.policy == "round_robin":
        choice = pool[assignment._rr_cursor % len(pool)]
        assignment._rr_cursor += 1
    else:
        raise ValidationError(f"unknown assignment policy {assignment.policy}")
    assignment.table[vm_id] = choice.gateway_ip
    return choice.gateway_ip


def single_vr_mode(topo: Topology) -> Dict[str, str]:
    """Validate the single-shared-VR configuration.

    Each tenant must have exactly one VR; every VM's gateway resolves to it.
    Returns tenant -> vr_id.  The VR's host link is the shared bottleneck and
    killing it severs all external connectivity for the tenant.
    """
    designated: Dict[str, str] = {}
    for tenant in topo.tenants:
        vrs = [vr for vr in topo.vrs.values() if vr.tenant == tenant]
        if len(vrs) != 1:
            raise ValidationError(
                f"single_vr mode requires exactly one VR for tenant {tenant}, "
                f"found {len(vrs)}")
        designated[tenant] = vrs[0].vr_id
    return designated


def build_vrrp_groups(topo: Topology, advert_interval: float = 1.0
                      ) -> Dict[str, List[VrrpGroup]]:
    """One group per VR virtual IP; every other tenant VR backs it up.

    Priorities descend with VR index so takeover order is deterministic.
    """
    groups: Dict[str, List[VrrpGroup]] = {}
    for tenant in sorted(topo.tenants):
        vrs = sorted((vr for vr in topo.vrs.values() if vr.tenant == tenant),
                     key=lambda vr: vr.vr_id)
        if len(vrs) > MAX_VRS_PER_TENANT:
            raise CapacityError(
                f"tenant {tenant}: {len(vrs)} VRs exceeds the VRID limit of "
                f"{MAX_VRS_PER_TENANT}")
        tenant_groups = []
        for idx, owner in enumerate(vrs):
            members = []
            for jdx, vr in enumerate(vrs):
                prio = 255 if vr.vr_id == owner.vr_id else 200 - jdx
                members.append(VrrpMember(
                    vr_id=vr.vr_id, priority=prio,
                    role=VrrpRole.MASTER if vr.vr_id == owner.vr_id
                    else VrrpRole.BACKUP))
            tenant_groups.append(VrrpGroup(
                vrid=idx + 1,
                virtual_ip=owner.gateway_ip,
                members=members,
                advert_interval=advert_interval))
        groups[tenant] = tenant_groups
    return groups
