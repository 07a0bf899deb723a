"""VM resolver stacks, VR NAT/LB, learning switches, VTEP tables."""

import pytest

from eywasim.dataplane import (
    SNAT_PORT_BASE,
    VTEP_PORT,
    VmStack,
    VrState,
    VsiState,
    VtepState,
    migrate_vm,
)
from eywasim.frames import (
    BROADCAST_MAC,
    HEAD_END_REPLICATION,
    ArpFrame,
    DataFrame,
    make_arp_reply,
    make_garp,
)
from eywasim.net_model import ValidationError, build_topology
from conftest import two_host_spec

GW = "10.0.0.1"


def stack():
    return VmStack("10.0.0.5", "02:aa:00:00:00:05", GW, "acme",
                   cache_ttl=30.0, arp_retry=1.0)


class TestVmStack:
    def test_resolve_broadcasts_then_caches(self):
        s = stack()
        req = s.resolve(GW, 0.0)
        assert isinstance(req, ArpFrame) and req.target_ip == GW
        # in flight: no duplicate until the retry timer
        assert s.resolve(GW, 0.5) is None
        retry = s.resolve(GW, 1.0)
        assert isinstance(retry, ArpFrame) and retry.seq != req.seq
        s.on_arp(make_arp_reply(retry, "02:bb:00:00:00:01"), 1.0002)
        assert s.resolve(GW, 1.1) == "02:bb:00:00:00:01"

    def test_cache_expires(self):
        s = stack()
        req = s.resolve(GW, 0.0)
        s.on_arp(make_arp_reply(req, "02:bb:00:00:00:01"), 0.1)
        assert s.lookup(GW, 30.0) == "02:bb:00:00:00:01"
        assert s.lookup(GW, 30.2) is None
        assert s.gateway_entry_expiry() == pytest.approx(30.1)

    def test_answers_requests_for_own_ip(self):
        s = stack()
        from eywasim.frames import make_arp_request
        req = make_arp_request("10.0.0.9", "02:aa:00:00:00:09", "10.0.0.5")
        rep = s.on_arp(req, 0.0)
        assert rep is not None and rep.sender_mac == s.mac
        other = make_arp_request("10.0.0.9", "02:aa:00:00:00:09", "10.0.0.6")
        assert s.on_arp(other, 0.0) is None

    def test_garp_refreshes_known_and_gateway_entries(self):
        s = stack()
        # unknown sender, not the gateway: ignored
        s.on_arp(make_garp("10.0.0.77", "02:aa:00:00:00:77"), 0.0)
        assert s.lookup("10.0.0.77", 0.1) is None
        # gateway GARP always lands (failover announcements)
        s.on_arp(make_garp(GW, "02:bb:00:00:00:02"), 0.0)
        assert s.lookup(GW, 0.1) == "02:bb:00:00:00:02"


def frame(src_ip, src_port, dst_ip="198.51.100.9", dst_port=443):
    return DataFrame(l2_src="02:aa:00:00:00:05", l2_dst="02:bb:00:00:00:01",
                     src_ip=src_ip, dst_ip=dst_ip, src_port=src_port,
                     dst_port=dst_port, flow_id="f")


class TestSnat:
    def test_lowest_free_port_replay(self):
        """Replay a scripted allocate/release sequence against a literal
        model of lowest-free-first allocation."""
        vr = VrState(GW, "02:bb:00:00:00:01", "203.0.113.1", "acme")
        expected_free = list(range(SNAT_PORT_BASE, SNAT_PORT_BASE + 6))
        live = {}
        for i in range(4):
            out = vr.snat_forward(frame("10.0.0.5", 40000 + i))
            want = expected_free.pop(0)
            live[i] = want
            assert out.src_port == want
            assert out.src_ip == "203.0.113.1"
        vr.release_snat(("10.0.0.5", 40001, "198.51.100.9", 443))
        expected_free.insert(0, live[1])
        out = vr.snat_forward(frame("10.0.0.5", 40009))
        assert out.src_port == expected_free.pop(0) == live[1]

    def test_mapping_is_stable_per_flow(self):
        vr = VrState(GW, "02:bb:00:00:00:01", "203.0.113.1", "acme")
        a = vr.snat_forward(frame("10.0.0.5", 40000))
        b = vr.snat_forward(frame("10.0.0.5", 40000))
        assert a.src_port == b.src_port

    def test_reverse_translation(self):
        vr = VrState(GW, "02:bb:00:00:00:01", "203.0.113.1", "acme")
        out = vr.snat_forward(frame("10.0.0.5", 40000))
        back = DataFrame(l2_src="02:ee:00:00:00:01", l2_dst=vr.mac,
                         src_ip="198.51.100.9", dst_ip="203.0.113.1",
                         src_port=443, dst_port=out.src_port, flow_id="f")
        inner = vr.snat_reverse(back)
        assert inner.dst_ip == "10.0.0.5" and inner.dst_port == 40000
        stray = DataFrame(l2_src="02:ee:00:00:00:01", l2_dst=vr.mac,
                          src_ip="198.51.100.9", dst_ip="203.0.113.1",
                          src_port=443, dst_port=59999, flow_id="f")
        assert vr.snat_reverse(stray) is None


class TestDnatLb:
    def members_vr(self):
        return VrState(GW, "02:bb:00:00:00:01", "203.0.113.1", "acme",
                       lb_members={80: ["vm01", "vm02", "vm03"]})

    def test_round_robin_matches_modular_oracle(self):
        vr = self.members_vr()
        members = ["vm01", "vm02", "vm03"]
        picks = [vr.dnat_select(80, ("198.51.100.9", 50000 + k))
                 for k in range(7)]
        assert picks == [members[k % 3] for k in range(7)]

    def test_sticky_connections(self):
        vr = self.members_vr()
        first = vr.dnat_select(80, ("198.51.100.9", 50000))
        vr.dnat_select(80, ("198.51.100.9", 50001))
        # same client tuple returns the original member, no cursor advance
        assert vr.dnat_select(80, ("198.51.100.9", 50000)) == first
        assert vr.dnat_select(80, ("198.51.100.9", 50002)) == "vm03"

    def test_unknown_port_drops(self):
        vr = self.members_vr()
        assert vr.dnat_select(8080, ("198.51.100.9", 50000)) is None

    def test_dnat_forward_rewrites_destination(self):
        vr = self.members_vr()
        inbound = DataFrame(l2_src="02:ee:00:00:00:01", l2_dst=vr.mac,
                            src_ip="198.51.100.9", dst_ip="203.0.113.1",
                            src_port=50000, dst_port=80, flow_id="f")
        out = vr.dnat_lb_forward(inbound, {"vm01": "10.0.0.11"})
        assert out.dst_ip == "10.0.0.11"


class TestVsi:
    def test_flood_then_learn(self):
        vsi = VsiState()
        vsi.attach("vm01")
        vsi.attach("vr01")
        # unknown unicast floods everywhere but the ingress
        out = vsi.forward("02:aa:01", "02:bb:01", "vm01")
        assert out == ["__vtep__", "vr01"]
        # the source was learned; replies unicast straight back
        out = vsi.forward("02:bb:01", "02:aa:01", "vr01")
        assert out == ["vm01"]

    def test_broadcast_excludes_ingress(self):
        vsi = VsiState()
        vsi.attach("vm01")
        vsi.attach("vm02")
        out = vsi.forward("02:aa:01", BROADCAST_MAC, "vm01")
        assert out == ["__vtep__", "vm02"]

    def test_detach_forgets_learned_macs(self):
        vsi = VsiState()
        vsi.attach("vm01")
        vsi.forward("02:aa:01", BROADCAST_MAC, "vm01")
        vsi.detach("vm01")
        assert vsi.table == {}
        assert VTEP_PORT in vsi.ports


class TestVtep:
    def test_flood_and_learn(self):
        vtep = VtepState("h01")
        assert vtep.lookup(0, "02:aa:01") == HEAD_END_REPLICATION
        vtep.learn(0, "02:aa:01", "h02")
        assert vtep.lookup(0, "02:aa:01") == "h02"
        assert vtep.lookup(0, BROADCAST_MAC) == HEAD_END_REPLICATION

    def test_tables_are_per_vni(self):
        vtep = VtepState("h01")
        vtep.learn(0, "02:aa:01", "h02")
        assert vtep.lookup(1, "02:aa:01") == HEAD_END_REPLICATION

    def test_forget_host(self):
        vtep = VtepState("h01")
        vtep.learn(0, "02:aa:01", "h02")
        vtep.learn(0, "02:aa:02", "h03")
        vtep.forget_host("h02")
        assert vtep.lookup(0, "02:aa:01") == HEAD_END_REPLICATION
        assert vtep.lookup(0, "02:aa:02") == "h03"


class TestMigrate:
    def test_rehomes_and_updates_agents(self):
        topo = build_topology(two_host_spec())
        migrate_vm(topo, "vm01", "h02")
        assert topo.vms["vm01"].host == "h02"
        assert "10.0.0.11" not in topo.agents[("h01", "acme")].local_vms
        assert "10.0.0.11" in topo.agents[("h02", "acme")].local_vms

    def test_rejects_duplicate_ip_on_destination(self):
        topo = build_topology(two_host_spec())
        from eywasim.net_model import VmSpec, place_instance
        place_instance(topo, VmSpec("vm02", "acme", "10.0.0.11x", "h02"), "h02")
        topo.vms["vm02"].spec.private_ip = "10.0.0.11"  # force the clash
        with pytest.raises(ValidationError):
            migrate_vm(topo, "vm01", "h02")

    def test_rejects_unknown_entities(self):
        topo = build_topology(two_host_spec())
        with pytest.raises(ValidationError):
            migrate_vm(topo, "vm99", "h02")
        with pytest.raises(ValidationError):
            migrate_vm(topo, "vm01", "h99")
