"""Wire-format model: Ethernet/ARP frames, tunnel encapsulation, ARP classification.

Frames are structural values, not byte buffers.  The tunnel layer emulates
VxLAN-style forwarding; unknown/broadcast destinations use head-end
replication instead of underlay multicast.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Optional, Union

BROADCAST_MAC = "ff:ff:ff:ff:ff:ff"
ZERO_MAC = "00:00:00:00:00:00"

#: Marker destination for tunnel frames replicated to every VTEP of the VNI.
HEAD_END_REPLICATION = "head-end-replication"


class ProtocolError(Exception):
    """Structural violation in frame handling (e.g. VNI/tenant mismatch)."""


class ArpOp(enum.Enum):
    REQUEST = "request"
    REPLY = "reply"


class ArpKind(enum.Enum):
    """Classification of an ARP frame relative to a tenant's shared gateway IP."""

    VR_TO_VM_REQUEST = "vr_to_vm_request"
    VM_TO_VR_REQUEST = "vm_to_vr_request"
    VM_TO_VM_REQUEST = "vm_to_vm_request"
    VR_TO_VM_REPLY = "vr_to_vm_reply"
    VM_TO_VR_REPLY = "vm_to_vr_reply"
    VM_TO_VM_REPLY = "vm_to_vm_reply"
    GARP_VR_TO_VR = "garp_vr_to_vr"


@dataclass(frozen=True)
class ArpFrame:
    op: ArpOp
    sender_ip: str
    sender_mac: str
    target_ip: str
    target_mac: str
    l2_dst: str
    l2_src: str
    tenant: Optional[str] = None
    # Per-request sequence stamped by the requesting stack; replies echo it so
    # duplicate replies for one request can be deduplicated.
    seq: int = 0

    @property
    def is_broadcast(self) -> bool:
        return self.l2_dst == BROADCAST_MAC

    @property
    def is_garp(self) -> bool:
        return (
            self.op is ArpOp.REQUEST
            and self.sender_ip == self.target_ip
            and self.l2_dst == BROADCAST_MAC
        )


@dataclass(frozen=True)
class DataFrame:
    l2_src: str
    l2_dst: str
    src_ip: str
    dst_ip: str
    src_port: int
    dst_port: int
    flow_id: str
    direction: str = "outbound"
    tenant: Optional[str] = None

    @property
    def five_tuple(self):
        return (self.src_ip, self.src_port, self.dst_ip, self.dst_port)


InnerFrame = Union[ArpFrame, DataFrame]


@dataclass(frozen=True)
class TunnelFrame:
    vni: int
    src_vtep_host: str
    dst: str  # host id or HEAD_END_REPLICATION
    inner: InnerFrame


def make_arp_request(sender_ip: str, sender_mac: str, target_ip: str,
                     tenant: Optional[str] = None, seq: int = 0) -> ArpFrame:
    """Broadcast ARP request (who-has target_ip, tell sender_ip)."""
    return ArpFrame(
        op=ArpOp.REQUEST,
        sender_ip=sender_ip,
        sender_mac=sender_mac,
        target_ip=target_ip,
        target_mac=ZERO_MAC,
        l2_dst=BROADCAST_MAC,
        l2_src=sender_mac,
        tenant=tenant,
        seq=seq,
    )


def make_arp_reply(request: ArpFrame, sender_mac: str) -> ArpFrame:
    """Unicast reply answering `request`: request.target_ip is-at sender_mac."""
    return ArpFrame(
        op=ArpOp.REPLY,
        sender_ip=request.target_ip,
        sender_mac=sender_mac,
        target_ip=request.sender_ip,
        target_mac=request.sender_mac,
        l2_dst=request.sender_mac,
        l2_src=sender_mac,
        tenant=request.tenant,
        seq=request.seq,
    )


def make_garp(ip: str, mac: str, tenant: Optional[str] = None) -> ArpFrame:
    """Gratuitous ARP: sender == target, broadcast destination."""
    return ArpFrame(
        op=ArpOp.REQUEST,
        sender_ip=ip,
        sender_mac=mac,
        target_ip=ip,
        target_mac=ZERO_MAC,
        l2_dst=BROADCAST_MAC,
        l2_src=mac,
        tenant=tenant,
    )


def classify(frame: ArpFrame, gateway_ip: str) -> ArpKind:
    """Classify an ARP frame against the tenant's shared gateway IP.

    Total and deterministic: every well-formed frame maps to exactly one kind.
    GARPs always classify as GARP_VR_TO_VR regardless of direction; agents
    identify VRs purely by the gateway-IP match since remote VR MACs are not
    known a priori.
    """
    if frame.is_garp:
        return ArpKind.GARP_VR_TO_VR
    if frame.op is ArpOp.REQUEST:
        if frame.sender_ip == gateway_ip:
            return ArpKind.VR_TO_VM_REQUEST
        if frame.target_ip == gateway_ip:
            return ArpKind.VM_TO_VR_REQUEST
        return ArpKind.VM_TO_VM_REQUEST
    # Replies: a reply whose sender is the gateway outranks the target check,
    # so sender==target==gateway replies classify as VR_TO_VM_REPLY.
    if frame.sender_ip == gateway_ip:
        return ArpKind.VR_TO_VM_REPLY
    if frame.target_ip == gateway_ip:
        return ArpKind.VM_TO_VR_REPLY
    return ArpKind.VM_TO_VM_REPLY


def encapsulate(frame: InnerFrame, vni: int, src_host: str, dst: str,
                tenant_vni: Optional[int] = None) -> TunnelFrame:
    """Wrap a frame for tunnel transport to `dst` (host or HER marker).

    If `tenant_vni` is given it must match `vni`; a mismatch means the caller
    is about to leak a frame into another tenant's overlay.
    """
    if tenant_vni is not None and tenant_vni != vni:
        raise ProtocolError(
            f"vni {vni} does not match tenant vni {tenant_vni} of inner frame")
    return TunnelFrame(vni=vni, src_vtep_host=src_host, dst=dst, inner=frame)


def decapsulate(tunnel: TunnelFrame) -> InnerFrame:
    """Inverse of encapsulate: decapsulate(encapsulate(f, ...)) == f."""
    return tunnel.inner


def restamp(frame: ArpFrame, seq: int) -> ArpFrame:
    return replace(frame, seq=seq)
