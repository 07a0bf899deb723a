"""Per-host gateway agent: mode state machine, ARP cache, rule engine.

One agent instance watches one (host, tenant) pair.  It only ever consumes
locally observable inputs: frames crossing the local vPort or VTEP, and the
local clock.  It never reads another host's state.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .frames import ArpFrame, ArpKind, make_arp_request, make_arp_reply


class Mode(enum.Enum):
    NORMAL = "normal"
    ORPHAN = "orphan"


class Direction(enum.Enum):
    OUTBOUND = "out"  # leaving the local VSi toward the VTEP
    INBOUND = "in"    # arriving from the tunnel toward the VSi


class Action(enum.Enum):
    PASS = "pass"
    FILTER = "filter"
    PROXY = "proxy"
    PASS_FIRST_FILTER_REST = "pass_first_filter_rest"
    NOT_APPLICABLE = "not_applicable"


class Origin(enum.Enum):
    LOCAL_VR = "local_vr"
    LOCAL_VM = "local_vm"
    REMOTE_VM = "remote_vm"
    REMOTE_VR = "remote_vr"


#: Synthetic rule id for inbound unicast VM->VM replies delivered to a local
#: VM.  The enumerated inter-VM cases cover requests only; without this pass
#: the plain-pass request path could never complete.
VM_REPLY_PASS = "vm-reply-pass"
#: Outbound VM->VM replies never cross a VTEP (inbound requests are proxied or
#: filtered before any local VM could answer them); seeing one is an anomaly.
VM_REPLY_OUT = "vm-reply-out"


class RuleEngineError(Exception):
    """Unknown rule coordinates; indicates a classification bug."""


@dataclass
class AgentConfig:
    health_interval: float = 1.0
    miss_threshold: int = 3
    cache_ttl: float = 60.0
    refresh_margin: float = 5.0
    overload_threshold: float = 0.8  # strict: util must exceed this
    ewma_window: float = 1.0
    flux_ttl: float = 2.0


@dataclass
class ArpCacheEntry:
    ip: str
    mac: str
    origin: Origin
    learned_at: float
    ttl: float

    def expired(self, now: float) -> bool:
        return now >= self.learned_at + self.ttl


@dataclass
class VrHealth:
    last_probe_sent: float = -1.0
    probe_outstanding: bool = False
    consecutive_misses: int = 0
    healthy: bool = False


@dataclass(frozen=True)
class RuleDecision:
    action: Action
    rule_id: str
    reply: Optional[ArpFrame] = None


@dataclass(frozen=True)
class LocalView:
    """Facts the rule engine may consult, all derivable on this host."""

    is_target_local: bool = False
    is_sender_local: bool = False
    cache_hit: bool = False


FluxKey = Tuple[str, str, int]


class AgentState:
    """Mutable per-(host, tenant) agent state.

    `local_vr_mac` / `local_vms` mirror what the agent can see on its own VSi
    (attachment is locally observable); they are maintained by the simulation
    when instances attach or detach, never by reading remote state.
    """

    def __init__(self, host: str, tenant: str, gateway_ip: str,
                 agent_mac: str, config: Optional[AgentConfig] = None):
        self.host = host
        self.tenant = tenant
        self.gateway_ip = gateway_ip
        self.agent_mac = agent_mac
        self.config = config or AgentConfig()
        self.mode = Mode.ORPHAN
        self.cache: Dict[str, ArpCacheEntry] = {}
        self.vr_health = VrHealth()
        self.vport_util = 0.0
        self.flux: Dict[FluxKey, float] = {}  # key -> expiry time
        self.counters: Dict[str, int] = {}
        self.anomalies: List[str] = []
        self.local_vr_mac: Optional[str] = None
        self.local_vms: Dict[str, str] = {}  # private ip -> mac

    # -- bookkeeping ------------------------------------------------------

    def count(self, rule_id: str) -> None:
        self.counters[rule_id] = self.counters.get(rule_id, 0) + 1

    def anomaly(self, msg: str) -> None:
        self.anomalies.append(msg)

    def overloaded(self) -> bool:
        return self.vport_util > self.config.overload_threshold

    def vr_attached(self, mac: str) -> None:
        self.local_vr_mac = mac
        self.vr_health = VrHealth(healthy=True)
        self.mode = Mode.NORMAL

    def vr_detached(self) -> None:
        self.local_vr_mac = None
        self.vr_health = VrHealth(healthy=False)
        self.mode = Mode.ORPHAN
        self.cache.pop(self.gateway_ip, None)

    def vm_attached(self, ip: str, mac: str) -> None:
        self.local_vms[ip] = mac

    def vm_detached(self, ip: str) -> None:
        self.local_vms.pop(ip, None)

    def cache_lookup(self, ip: str, now: float) -> Optional[ArpCacheEntry]:
        entry = self.cache.get(ip)
        if entry is not None and not entry.expired(now):
            return entry
        return None

    def flux_admit(self, key: FluxKey, now: float) -> bool:
        """True for the first reply of a request, False for later duplicates.

        Entries expire after flux_ttl so retried requests (new seq) and long
        runs do not grow the map without bound.
        """
        self.flux = {k: exp for k, exp in self.flux.items() if exp > now}
        if key in self.flux:
            return False
        self.flux[key] = now + self.config.flux_ttl
        return True


def decide(state: AgentState, kind: ArpKind, direction: Direction,
           frame: ArpFrame, view: LocalView) -> RuleDecision:
    """Rule engine: map (mode, direction, kind, local facts) to a decision.

    Rule ids follow the enumerated control-rule cases; sub-cases pick the
    branch from the locally observable facts in `view` and the agent's own
    overload estimate.  NOT_APPLICABLE coordinates are structurally
    unreachable for frames the dataplane actually produces; producing one at
    runtime is logged as an anomaly by the caller.
    """
    mode = state.mode
    out = direction is Direction.OUTBOUND

    if kind is ArpKind.VR_TO_VM_REQUEST:
        if mode is Mode.NORMAL and out:
            if view.is_target_local:
                return RuleDecision(Action.FILTER, "1-2")
            if view.cache_hit:
                return RuleDecision(Action.PROXY, "1-3")
            return RuleDecision(Action.PASS, "1-1")
        if mode is Mode.NORMAL and not out:
            return RuleDecision(Action.FILTER, "2")
        if mode is Mode.ORPHAN and out:
            return RuleDecision(Action.NOT_APPLICABLE, "3")
        if view.is_target_local:
            return RuleDecision(Action.PROXY, "4-2")
        return RuleDecision(Action.FILTER, "4-1")

    if kind is ArpKind.VM_TO_VR_REQUEST:
        if mode is Mode.NORMAL and out:
            return RuleDecision(Action.FILTER, "5")
        if mode is Mode.NORMAL and not out:
            if state.overloaded():
                return RuleDecision(Action.FILTER, "6-1")
            return RuleDecision(Action.PROXY, "6-2")
        if out:
            return RuleDecision(Action.PASS, "7")
        return RuleDecision(Action.FILTER, "8")

    if kind is ArpKind.VR_TO_VM_REPLY:
        if mode is Mode.NORMAL:
            return RuleDecision(Action.NOT_APPLICABLE, "9" if out else "10")
        if out:
            return RuleDecision(Action.NOT_APPLICABLE, "11")
        return RuleDecision(Action.PASS_FIRST_FILTER_REST, "12")

    if kind is ArpKind.VM_TO_VR_REPLY:
        if mode is Mode.NORMAL and out:
            return RuleDecision(Action.NOT_APPLICABLE, "13")
        if mode is Mode.NORMAL and not out:
            return RuleDecision(Action.PASS, "14")
        return RuleDecision(Action.NOT_APPLICABLE, "15" if out else "16")

    if kind is ArpKind.GARP_VR_TO_VR:
        if mode is Mode.NORMAL and out:
            return RuleDecision(Action.FILTER, "17")
        if mode is Mode.NORMAL and not out:
            return RuleDecision(Action.NOT_APPLICABLE, "18")
        return RuleDecision(Action.NOT_APPLICABLE, "19" if out else "20")

    if kind is ArpKind.VM_TO_VM_REQUEST:
        base = "21" if mode is Mode.NORMAL else "23"
        if out:
            if view.is_target_local:
                return RuleDecision(Action.FILTER, base + "-2")
            if view.cache_hit:
                return RuleDecision(Action.PROXY, base + "-3")
            return RuleDecision(Action.PASS, base + "-1")
        base = "22" if mode is Mode.NORMAL else "24"
        if view.is_target_local:
            return RuleDecision(Action.PROXY, base + "-2")
        return RuleDecision(Action.FILTER, base + "-1")

    if kind is ArpKind.VM_TO_VM_REPLY:
        if out:
            return RuleDecision(Action.NOT_APPLICABLE, VM_REPLY_OUT)
        if view.is_target_local:
            return RuleDecision(Action.PASS, VM_REPLY_PASS)
        return RuleDecision(Action.FILTER, VM_REPLY_PASS)

    raise RuleEngineError(f"unhandled rule coordinates: {mode} {direction} {kind}")


def synthesize_proxy_reply(state: AgentState, request: ArpFrame,
                           now: float) -> Optional[ArpFrame]:
    """Build the unicast reply a Proxy decision promised, or None if stale.

    Resolution order: live local VR (gateway requests), live local VM, then an
    unexpired cache entry.  A reply is never synthesized from an expired
    entry; that case is dropped and logged as an anomaly by the caller.
    """
    target = request.target_ip
    if target == state.gateway_ip:
        if state.mode is Mode.NORMAL and state.local_vr_mac is not None:
            return make_arp_reply(request, state.local_vr_mac)
        return None
    mac = state.local_vms.get(target)
    if mac is not None:
        return make_arp_reply(request, mac)
    entry = state.cache_lookup(target, now)
    if entry is not None:
        return make_arp_reply(request, entry.mac)
    return None


def observe(state: AgentState, frame: ArpFrame, direction: Direction,
            origin: Origin, now: float) -> None:
    """Passive learning: upsert sender ip->mac from any observed ARP frame.

    Called on every ARP frame traversing the vPort or VTEP regardless of the
    rule decision.  A frame from the local VR also counts as proof of life.
    """
    state.cache[frame.sender_ip] = ArpCacheEntry(
        ip=frame.sender_ip,
        mac=frame.sender_mac,
        origin=origin,
        learned_at=now,
        ttl=state.config.cache_ttl,
    )
    if origin is Origin.LOCAL_VR:
        state.vr_health.healthy = True
        state.vr_health.consecutive_misses = 0
        state.vr_health.probe_outstanding = False
        if state.mode is Mode.ORPHAN and state.local_vr_mac is not None:
            state.mode = Mode.NORMAL


def monitor_tick(state: AgentState, now: float) -> Tuple[List[ArpFrame], Optional[Mode]]:
    """Periodic health check and cache refresh.

    Returns (probe frames to deliver locally, mode transition if one
    happened).  Probes go to the local VR and to local-origin cache entries
    close to expiry; remote-origin entries are never probed and simply age
    out.
    """
    cfg = state.config
    probes: List[ArpFrame] = []
    transition: Optional[Mode] = None

    if state.local_vr_mac is not None:
        if state.vr_health.probe_outstanding:
            state.vr_health.consecutive_misses += 1
            if (state.vr_health.consecutive_misses >= cfg.miss_threshold
                    and state.mode is Mode.NORMAL):
                state.vr_health.healthy = False
                state.mode = Mode.ORPHAN
                state.cache.pop(state.gateway_ip, None)
                transition = Mode.ORPHAN
        probe = make_arp_request(
            "0.0.0.0", state.agent_mac, state.gateway_ip, tenant=state.tenant)
        state.vr_health.last_probe_sent = now
        state.vr_health.probe_outstanding = True
        probes.append(probe)

    for entry in list(state.cache.values()):
        if entry.origin is not Origin.LOCAL_VM:
            continue
        if now >= entry.learned_at + entry.ttl - cfg.refresh_margin:
            probes.append(make_arp_request(
                "0.0.0.0", state.agent_mac, entry.ip, tenant=state.tenant))

    return probes, transition


def update_qos(state: AgentState, bytes_through_vport: float, window: float,
               capacity_bps: float) -> None:
    """Fold one accounting window into the vPort utilization EWMA."""
    if window <= 0 or capacity_bps <= 0:
        return
    util = min(1.0, (bytes_through_vport * 8.0 / window) / capacity_bps)
    alpha = min(1.0, window / state.config.ewma_window)
    state.vport_util = (1 - alpha) * state.vport_util + alpha * util
