"""Deterministic desk-scale simulator of shared-gateway overlay networking.

Per-host agents filter, proxy, or pass ARP at the tunnel boundary so many
virtual routers can share one gateway IP without a single point of failure;
a fluid max-min fair solver models data throughput on top of a discrete
event core.  See the `scenarios` module for the builtin experiment library
and `cli` for the command line entry point.
"""

from .agent import Action, AgentConfig, AgentState, Direction, Mode, decide
from .engine import FlowSpec, Simulation
from .frames import ArpFrame, ArpKind, ArpOp, classify
from .net_model import (
    ExternalSpec,
    HostSpec,
    TenantSpec,
    Topology,
    TopologySpec,
    ValidationError,
    VmSpec,
    VrSpec,
    build_topology,
)
from .report import RunReport, run_scenario
from .scenarios import ScenarioDoc, builtin_scenarios, load_scenario

__version__ = "0.1.0"

__all__ = [
    "Action", "AgentConfig", "AgentState", "ArpFrame", "ArpKind", "ArpOp",
    "Direction", "ExternalSpec", "FlowSpec", "HostSpec", "Mode", "RunReport",
    "ScenarioDoc", "Simulation", "TenantSpec", "Topology", "TopologySpec",
    "ValidationError", "VmSpec", "VrSpec", "build_topology",
    "builtin_scenarios", "classify", "decide", "load_scenario",
    "run_scenario",
]
