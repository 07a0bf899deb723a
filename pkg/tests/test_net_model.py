"""Topology construction, VNI allocation, and structural invariants."""

import pytest

from eywasim.agent import Mode
from eywasim.net_model import (
    VNI_SPACE,
    CapacityError,
    ExternalSpec,
    HostSpec,
    TenantSpec,
    TopologySpec,
    ValidationError,
    VmSpec,
    VniRegistry,
    VrSpec,
    build_topology,
    check_invariants,
    place_instance,
)
from conftest import two_host_spec


class TestVniRegistry:
    def test_lowest_first(self):
        reg = VniRegistry()
        assert [reg.allocate(f"t{i}") for i in range(3)] == [0, 1, 2]

    def test_released_reused_before_high_water(self):
        reg = VniRegistry()
        for i in range(4):
            reg.allocate(f"t{i}")
        reg.release(2)
        reg.release(1)
        assert reg.allocate("t4") == 1
        assert reg.allocate("t5") == 2
        assert reg.allocate("t6") == 4

    def test_release_unallocated_rejected(self):
        reg = VniRegistry()
        with pytest.raises(ValidationError):
            reg.release(7)

    def test_exhaustion_at_exactly_2_24(self):
        reg = VniRegistry.prefilled(VNI_SPACE - 1)
        assert reg.allocate("last") == VNI_SPACE - 1
        with pytest.raises(CapacityError):
            reg.allocate("one-too-many")
        reg.release(VNI_SPACE - 1)
        assert reg.allocate("again") == VNI_SPACE - 1


class TestBuildTopology:
    def test_basic_build(self):
        topo = build_topology(two_host_spec())
        assert topo.vni_of("acme") == 0
        assert topo.vms["vm01"].mac.startswith("02:aa:")
        assert topo.vrs["vr01"].mac.startswith("02:bb:")
        agent = topo.agents[("h01", "acme")]
        assert agent.mode is Mode.NORMAL
        assert agent.local_vr_mac == topo.vrs["vr01"].mac
        assert agent.local_vms == {"10.0.0.11": topo.vms["vm01"].mac}
        assert check_invariants(topo) == []

    def test_unknown_mode(self):
        spec = two_host_spec()
        spec.mode = "bogus"
        with pytest.raises(ValidationError):
            build_topology(spec)

    def test_duplicate_private_ip_in_tenant(self):
        spec = two_host_spec()
        spec.tenants[0].vms.append(
            VmSpec("vm02", "acme", "10.0.0.11", "h02"))
        with pytest.raises(ValidationError, match="10.0.0.11"):
            build_topology(spec)

    def test_duplicate_public_ip(self):
        spec = two_host_spec()
        spec.tenants[0].vrs.append(
            VrSpec("vr02", "acme", "h02", "203.0.113.1"))
        with pytest.raises(ValidationError, match="203.0.113.1"):
            build_topology(spec)

    def test_one_vr_per_host_per_tenant(self):
        spec = two_host_spec()
        spec.tenants[0].vrs.append(
            VrSpec("vr02", "acme", "h01", "203.0.113.2"))
        with pytest.raises(ValidationError, match="already has a VR"):
            build_topology(spec)

    def test_dangling_host_reference(self):
        spec = two_host_spec()
        spec.tenants[0].vms.append(
            VmSpec("vm09", "acme", "10.0.0.99", "h99"))
        with pytest.raises(ValidationError, match="h99"):
            build_topology(spec)

    def test_nonpositive_capacity(self):
        spec = two_host_spec()
        spec.hosts[0] = HostSpec("h01", capacity_bps=0)
        with pytest.raises(ValidationError, match="capacity"):
            build_topology(spec)

    def test_nic_defaults_to_host_capacity(self):
        spec = two_host_spec()
        spec.hosts[0] = HostSpec("h01", capacity_bps=2e9)
        topo = build_topology(spec)
        assert topo.vms["vm01"].nic_capacity_bps == 2e9
        assert topo.vrs["vr01"].port_capacity_bps == 2e9


class TestPlaceInstance:
    def test_vr_on_orphan_host_announces_itself(self):
        topo = build_topology(two_host_spec())
        # h02 currently has no instances for the tenant
        vr, garps = place_instance(
            topo, VrSpec("vr02", "acme", "h02", "203.0.113.2"), "h02")
        assert len(garps) == 1
        assert garps[0].is_garp and garps[0].sender_mac == vr.mac
        assert topo.agents[("h02", "acme")].mode is Mode.NORMAL

    def test_vm_placement_updates_agent(self):
        topo = build_topology(two_host_spec())
        place_instance(topo, VmSpec("vm02", "acme", "10.0.0.12", "h02"), "h02")
        assert "10.0.0.12" in topo.agents[("h02", "acme")].local_vms

    def test_tenant_hosts_sorted_and_live_only(self):
        topo = build_topology(two_host_spec())
        place_instance(topo, VmSpec("vm02", "acme", "10.0.0.12", "h02"), "h02")
        assert topo.tenant_hosts("acme") == ["h01", "h02"]
        topo.vms["vm02"].alive = False
        assert topo.tenant_hosts("acme") == ["h01"]


def test_invariant_flags_inconsistent_agent():
    topo = build_topology(two_host_spec())
    agent = topo.agents[("h01", "acme")]
    agent.vr_health.healthy = False  # Normal mode but believed-dead VR
    problems = check_invariants(topo)
    assert problems and "h01" in problems[0]
