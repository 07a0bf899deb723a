"""VRRP group behavior, gateway assignment policies, shared-VR validation."""

import pytest

from eywasim.baselines import (
    MAX_VRS_PER_TENANT,
    GatewayAssignment,
    VrrpGroup,
    VrrpMember,
    VrrpRole,
    assign_gateway,
    build_vrrp_groups,
    single_vr_mode,
    vrrp_tick,
)
from eywasim.net_model import (
    CapacityError,
    ExternalSpec,
    HostSpec,
    TenantSpec,
    TopologySpec,
    ValidationError,
    VmSpec,
    VrSpec,
    build_topology,
)


def three_vr_group():
    return VrrpGroup(vrid=1, virtual_ip="10.0.1.1", members=[
        VrrpMember("vr01", 255, VrrpRole.MASTER),
        VrrpMember("vr02", 200),
        VrrpMember("vr03", 199),
    ])


class TestVrrpTick:
    def test_live_master_keeps_advertising(self):
        g = three_vr_group()
        for t in (1.0, 2.0, 3.0):
            sent, promoted = vrrp_tick(g, t)
            assert sent and promoted is None
        assert g.advert_bytes == 300.0
        assert g.promotions == []

    def test_promotion_after_dead_interval(self):
        """Hand timeline: advert at t=10, master dies, backups see silence
        at 11/12 and promote on the first tick >= 3s after the last advert."""
        g = three_vr_group()
        vrrp_tick(g, 10.0)
        g.mark_dead("vr01")
        assert vrrp_tick(g, 11.0) == (False, None)
        assert vrrp_tick(g, 12.0) == (False, None)
        sent, promoted = vrrp_tick(g, 13.0)
        assert (sent, promoted) == (False, "vr02")
        assert g.master().vr_id == "vr02"
        assert g.promotions == [(13.0, "vr02")]
        # promoted member now adverts normally
        assert vrrp_tick(g, 14.0) == (True, None)

    def test_highest_priority_live_backup_wins(self):
        g = three_vr_group()
        vrrp_tick(g, 10.0)
        g.mark_dead("vr01")
        g.mark_dead("vr02")
        _, promoted = vrrp_tick(g, 13.0)
        assert promoted == "vr03"

    def test_no_candidates_left(self):
        g = three_vr_group()
        vrrp_tick(g, 10.0)
        for vr in ("vr01", "vr02", "vr03"):
            g.mark_dead(vr)
        assert vrrp_tick(g, 20.0) == (False, None)

    def test_vrid_range_enforced(self):
        with pytest.raises(ValidationError):
            VrrpGroup(vrid=0, virtual_ip="10.0.1.1", members=[])
        with pytest.raises(ValidationError):
            VrrpGroup(vrid=256, virtual_ip="10.0.1.1", members=[])


def multi_vr_spec():
    return TopologySpec(
        hosts=[HostSpec("h01"), HostSpec("h02"), HostSpec("h03")],
        externals=[ExternalSpec("ext01")],
        tenants=[TenantSpec("acme", vms=[
            VmSpec("vm01", "acme", "10.0.0.11", "h01"),
            VmSpec("vm02", "acme", "10.0.0.12", "h02"),
            VmSpec("vm03", "acme", "10.0.0.13", "h03"),
        ], vrs=[
            VrSpec("vr01", "acme", "h01", "203.0.113.1",
                   gateway_ip="10.0.1.1"),
            VrSpec("vr02", "acme", "h02", "203.0.113.2",
                   gateway_ip="10.0.1.2"),
        ])],
        mode="mvrrp")


class TestGatewayAssignment:
    def test_latency_prefers_local_vr(self):
        topo = build_topology(multi_vr_spec())
        a = GatewayAssignment(policy="latency")
        assert assign_gateway(a, topo, "vm01") == "10.0.1.1"
        assert assign_gateway(a, topo, "vm02") == "10.0.1.2"
        # no co-resident VR: falls back to the first of the pool
        assert assign_gateway(a, topo, "vm03") == "10.0.1.1"

    def test_round_robin_cycles(self):
        topo = build_topology(multi_vr_spec())
        a = GatewayAssignment(policy="round_robin")
        picks = [assign_gateway(a, topo, v)
                 for v in ("vm01", "vm02", "vm03")]
        assert picks == ["10.0.1.1", "10.0.1.2", "10.0.1.1"]

    def test_assignment_never_changes(self):
        topo = build_topology(multi_vr_spec())
        a = GatewayAssignment(policy="latency")
        first = assign_gateway(a, topo, "vm01")
        topo.vrs["vr01"].alive = False
        # re-asking after the preferred VR dies still returns the original
        assert assign_gateway(a, topo, "vm01") == first

    def test_unknown_policy(self):
        topo = build_topology(multi_vr_spec())
        a = GatewayAssignment(policy="random")
        with pytest.raises(ValidationError):
            assign_gateway(a, topo, "vm01")


class TestSingleVr:
    def test_exactly_one_vr_ok(self):
        spec = multi_vr_spec()
        spec.mode = "single_vr"
        del spec.tenants[0].vrs[1]
        topo = build_topology(spec)
        assert single_vr_mode(topo) == {"acme": "vr01"}

    def test_two_vrs_rejected(self):
        spec = multi_vr_spec()
        spec.mode = "single_vr"
        topo = build_topology(spec)
        with pytest.raises(ValidationError, match="exactly one"):
            single_vr_mode(topo)


class TestBuildGroups:
    def test_one_group_per_vr(self):
        topo = build_topology(multi_vr_spec())
        groups = build_vrrp_groups(topo)["acme"]
        assert [g.vrid for g in groups] == [1, 2]
        assert [g.virtual_ip for g in groups] == ["10.0.1.1", "10.0.1.2"]
        g1 = groups[0]
        prios = {m.vr_id: m.priority for m in g1.members}
        assert prios == {"vr01": 255, "vr02": 199}
        assert g1.master().vr_id == "vr01"
        assert groups[1].master().vr_id == "vr02"

    def test_vrid_limit(self):
        class FakeVr:
            def __init__(self, i):
                self.vr_id = f"vr{i:03d}"
                self.tenant = "acme"
                self.gateway_ip = f"10.0.{i // 250}.{i % 250}"

        class FakeTopo:
            tenants = ["acme"]
            vrs = {f"vr{i:03d}": FakeVr(i)
                   for i in range(MAX_VRS_PER_TENANT + 1)}

        with pytest.raises(CapacityError):
            build_vrrp_groups(FakeTopo())
