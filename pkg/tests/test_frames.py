"""ARP frame construction, classification, and tunnel encapsulation."""

import pytest
from hypothesis import given, strategies as st

from eywasim.frames import (
    BROADCAST_MAC,
    ArpKind,
    ArpOp,
    ProtocolError,
    classify,
    decapsulate,
    encapsulate,
    make_arp_reply,
    make_arp_request,
    make_garp,
    restamp,
)

GW = "10.0.0.1"


def test_request_is_broadcast():
    req = make_arp_request("10.0.0.5", "02:aa:00:00:00:01", GW, seq=7)
    assert req.op is ArpOp.REQUEST
    assert req.l2_dst == BROADCAST_MAC
    assert req.is_broadcast and not req.is_garp
    assert req.seq == 7


def test_reply_echoes_request():
    req = make_arp_request("10.0.0.5", "02:aa:00:00:00:01", GW, seq=3)
    rep = make_arp_reply(req, "02:bb:00:00:00:01")
    assert rep.op is ArpOp.REPLY
    assert rep.sender_ip == GW
    assert rep.target_ip == "10.0.0.5"
    assert rep.l2_dst == "02:aa:00:00:00:01"
    assert rep.seq == 3
    assert not rep.is_broadcast


def test_garp_detected():
    garp = make_garp(GW, "02:bb:00:00:00:01")
    assert garp.is_garp
    assert classify(garp, GW) is ArpKind.GARP_VR_TO_VR
    # GARP outranks the sender-is-gateway request classification
    assert classify(garp, "192.0.2.1") is ArpKind.GARP_VR_TO_VR


def test_classify_requests():
    vr_req = make_arp_request(GW, "02:bb:00:00:00:01", "10.0.0.5")
    vm_req = make_arp_request("10.0.0.5", "02:aa:00:00:00:01", GW)
    vm_vm = make_arp_request("10.0.0.5", "02:aa:00:00:00:01", "10.0.0.6")
    assert classify(vr_req, GW) is ArpKind.VR_TO_VM_REQUEST
    assert classify(vm_req, GW) is ArpKind.VM_TO_VR_REQUEST
    assert classify(vm_vm, GW) is ArpKind.VM_TO_VM_REQUEST


def test_classify_replies():
    vm_req = make_arp_request("10.0.0.5", "02:aa:00:00:00:01", GW)
    vr_rep = make_arp_reply(vm_req, "02:bb:00:00:00:01")
    assert classify(vr_rep, GW) is ArpKind.VR_TO_VM_REPLY
    vr_req = make_arp_request(GW, "02:bb:00:00:00:01", "10.0.0.5")
    vm_rep = make_arp_reply(vr_req, "02:aa:00:00:00:02")
    assert classify(vm_rep, GW) is ArpKind.VM_TO_VR_REPLY
    peer_req = make_arp_request("10.0.0.5", "02:aa:00:00:00:01", "10.0.0.6")
    peer_rep = make_arp_reply(peer_req, "02:aa:00:00:00:02")
    assert classify(peer_rep, GW) is ArpKind.VM_TO_VM_REPLY


ips = st.sampled_from(["10.0.0.1", "10.0.0.5", "10.0.0.6", "0.0.0.0"])


@given(op=st.sampled_from(list(ArpOp)), sender=ips, target=ips,
       broadcast=st.booleans())
def test_classify_total(op, sender, target, broadcast):
    """Every syntactically valid frame maps to exactly one kind."""
    frame = make_arp_request(sender, "02:aa:00:00:00:01", target)
    if op is ArpOp.REPLY:
        frame = make_arp_reply(frame, "02:aa:00:00:00:02")
    kind = classify(frame, GW)
    assert isinstance(kind, ArpKind)
    assert classify(frame, GW) is kind  # deterministic


def test_encapsulate_roundtrip():
    req = make_arp_request("10.0.0.5", "02:aa:00:00:00:01", GW)
    tun = encapsulate(req, 42, "h01", "h02", tenant_vni=42)
    assert tun.vni == 42 and tun.src_vtep_host == "h01" and tun.dst == "h02"
    assert decapsulate(tun) == req


def test_encapsulate_vni_mismatch():
    req = make_arp_request("10.0.0.5", "02:aa:00:00:00:01", GW)
    with pytest.raises(ProtocolError):
        encapsulate(req, 42, "h01", "h02", tenant_vni=43)


def test_restamp():
    req = make_arp_request("10.0.0.5", "02:aa:00:00:00:01", GW, seq=1)
    assert restamp(req, 9).seq == 9
    assert req.seq == 1  # frames are immutable values
