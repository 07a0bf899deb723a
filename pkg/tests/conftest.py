"""Shared fixtures and topology builders for the test suite."""

from eywasim.net_model import (
    ExternalSpec,
    HostSpec,
    TenantSpec,
    TopologySpec,
    VmSpec,
    VrSpec,
)


def two_host_spec(mode="eywa"):
    """Smallest interesting fleet: one VR+VM host and one empty host."""
    return TopologySpec(
        hosts=[HostSpec("h01"), HostSpec("h02")],
        externals=[ExternalSpec("ext01")],
        tenants=[TenantSpec("acme", vms=[
            VmSpec("vm01", "acme", "10.0.0.11", "h01"),
        ], vrs=[
            VrSpec("vr01", "acme", "h01", "203.0.113.1"),
        ])],
        mode=mode)
