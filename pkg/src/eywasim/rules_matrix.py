"""Conformance sweep of the ARP rule engine against a hard-coded matrix.

The expected table below is written out literally, row by row, independent of
the engine's control flow: the sweep drives `decide` across every
mode x direction x kind x facts combination and diffs the result against the
table.  A second census lists which coordinates the dataplane can actually
produce, verifying that every not-applicable coordinate is unreachable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Dict, List, Optional, Tuple

from .agent import (
    Action,
    AgentState,
    Direction,
    LocalView,
    Mode,
    VM_REPLY_OUT,
    VM_REPLY_PASS,
    decide,
)
from .frames import (
    ArpFrame,
    ArpKind,
    classify,
    make_arp_reply,
    make_arp_request,
    make_garp,
)

GATEWAY_IP = "10.0.0.1"

N, O = Mode.NORMAL, Mode.ORPHAN
OUT, IN = Direction.OUTBOUND, Direction.INBOUND
K = ArpKind

#: Expected decisions.  Each row: (mode, direction, kind, fact constraints,
#: action, rule id).  Unlisted facts are don't-care; the first consistent row
#: wins, so more specific rows come first within a coordinate group.
EXPECTED_ROWS: List[Tuple[Mode, Direction, ArpKind, dict, Action, str]] = [
    (N, OUT, K.VR_TO_VM_REQUEST, {"target_local": True}, Action.FILTER, "1-2"),
    (N, OUT, K.VR_TO_VM_REQUEST, {"cache_hit": True}, Action.PROXY, "1-3"),
    (N, OUT, K.VR_TO_VM_REQUEST, {}, Action.PASS, "1-1"),
    (N, IN, K.VR_TO_VM_REQUEST, {}, Action.FILTER, "2"),
    (O, OUT, K.VR_TO_VM_REQUEST, {}, Action.NOT_APPLICABLE, "3"),
    (O, IN, K.VR_TO_VM_REQUEST, {"target_local": True}, Action.PROXY, "4-2"),
    (O, IN, K.VR_TO_VM_REQUEST, {}, Action.FILTER, "4-1"),

    (N, OUT, K.VM_TO_VR_REQUEST, {}, Action.FILTER, "5"),
    (N, IN, K.VM_TO_VR_REQUEST, {"overloaded": True}, Action.FILTER, "6-1"),
    (N, IN, K.VM_TO_VR_REQUEST, {}, Action.PROXY, "6-2"),
    (O, OUT, K.VM_TO_VR_REQUEST, {}, Action.PASS, "7"),
    (O, IN, K.VM_TO_VR_REQUEST, {}, Action.FILTER, "8"),

    (N, OUT, K.VR_TO_VM_REPLY, {}, Action.NOT_APPLICABLE, "9"),
    (N, IN, K.VR_TO_VM_REPLY, {}, Action.NOT_APPLICABLE, "10"),
    (O, OUT, K.VR_TO_VM_REPLY, {}, Action.NOT_APPLICABLE, "11"),
    (O, IN, K.VR_TO_VM_REPLY, {}, Action.PASS_FIRST_FILTER_REST, "12"),

    (N, OUT, K.VM_TO_VR_REPLY, {}, Action.NOT_APPLICABLE, "13"),
    (N, IN, K.VM_TO_VR_REPLY, {}, Action.PASS, "14"),
    (O, OUT, K.VM_TO_VR_REPLY, {}, Action.NOT_APPLICABLE, "15"),
    (O, IN, K.VM_TO_VR_REPLY, {}, Action.NOT_APPLICABLE, "16"),

    (N, OUT, K.GARP_VR_TO_VR, {}, Action.FILTER, "17"),
    (N, IN, K.GARP_VR_TO_VR, {}, Action.NOT_APPLICABLE, "18"),
    (O, OUT, K.GARP_VR_TO_VR, {}, Action.NOT_APPLICABLE, "19"),
    (O, IN, K.GARP_VR_TO_VR, {}, Action.NOT_APPLICABLE, "20"),

    (N, OUT, K.VM_TO_VM_REQUEST, {"target_local": True}, Action.FILTER, "21-2"),
    (N, OUT, K.VM_TO_VM_REQUEST, {"cache_hit": True}, Action.PROXY, "21-3"),
    (N, OUT, K.VM_TO_VM_REQUEST, {}, Action.PASS, "21-1"),
    (N, IN, K.VM_TO_VM_REQUEST, {"target_local": True}, Action.PROXY, "22-2"),
    (N, IN, K.VM_TO_VM_REQUEST, {}, Action.FILTER, "22-1"),
    (O, OUT, K.VM_TO_VM_REQUEST, {"target_local": True}, Action.FILTER, "23-2"),
    (O, OUT, K.VM_TO_VM_REQUEST, {"cache_hit": True}, Action.PROXY, "23-3"),
    (O, OUT, K.VM_TO_VM_REQUEST, {}, Action.PASS, "23-1"),
    (O, IN, K.VM_TO_VM_REQUEST, {"target_local": True}, Action.PROXY, "24-2"),
    (O, IN, K.VM_TO_VM_REQUEST, {}, Action.FILTER, "24-1"),

    (N, OUT, K.VM_TO_VM_REPLY, {}, Action.NOT_APPLICABLE, VM_REPLY_OUT),
    (O, OUT, K.VM_TO_VM_REPLY, {}, Action.NOT_APPLICABLE, VM_REPLY_OUT),
    (N, IN, K.VM_TO_VM_REPLY, {"target_local": True}, Action.PASS, VM_REPLY_PASS),
    (N, IN, K.VM_TO_VM_REPLY, {}, Action.FILTER, VM_REPLY_PASS),
    (O, IN, K.VM_TO_VM_REPLY, {"target_local": True}, Action.PASS, VM_REPLY_PASS),
    (O, IN, K.VM_TO_VM_REPLY, {}, Action.FILTER, VM_REPLY_PASS),
]

#: Coordinates the dataplane can actually produce at a deciding VTEP.
#: Derived from a census of who emits which ARP frames and which decisions
#: forward them across the tunnel:
#:  - VRs resolve VM MACs (live VR implies Normal host); passed requests
#:    arrive inbound at both Normal and orphan remote hosts.
#:  - VMs resolve the gateway everywhere; only orphan hosts let the broadcast
#:    out, so it can arrive inbound anywhere.
#:  - Proxy replies to escaped gateway requests return inbound to the (still
#:    orphan) requester host as gateway-sender replies.
#:  - Proxy replies to VR requests return inbound as VM-sender replies to the
#:    (Normal) requesting host.
#:  - GARPs originate only from live VRs (Normal hosts) and are filtered
#:    there, so they never appear inbound.
#:  - VM-to-VM requests may originate anywhere; inbound ones are proxied or
#:    filtered, never delivered, so no VM ever replies toward the tunnel.
REACHABLE = {
    (N, OUT, K.VR_TO_VM_REQUEST),
    (N, IN, K.VR_TO_VM_REQUEST),
    (O, IN, K.VR_TO_VM_REQUEST),
    (N, OUT, K.VM_TO_VR_REQUEST),
    (N, IN, K.VM_TO_VR_REQUEST),
    (O, OUT, K.VM_TO_VR_REQUEST),
    (O, IN, K.VM_TO_VR_REQUEST),
    (O, IN, K.VR_TO_VM_REPLY),
    (N, IN, K.VM_TO_VR_REPLY),
    (N, OUT, K.GARP_VR_TO_VR),
    (N, OUT, K.VM_TO_VM_REQUEST),
    (N, IN, K.VM_TO_VM_REQUEST),
    (O, OUT, K.VM_TO_VM_REQUEST),
    (O, IN, K.VM_TO_VM_REQUEST),
    (N, IN, K.VM_TO_VM_REPLY),
    (O, IN, K.VM_TO_VM_REPLY),
}


@dataclass
class MatrixReport:
    total: int = 0
    mismatches: List[dict] = field(default_factory=list)
    na_violations: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.mismatches and not self.na_violations


def _frame_for(kind: ArpKind) -> ArpFrame:
    if kind is K.VR_TO_VM_REQUEST:
        return make_arp_request(GATEWAY_IP, "02:bb:00:00:00:01", "10.0.0.50")
    if kind is K.VM_TO_VR_REQUEST:
        return make_arp_request("10.0.0.50", "02:aa:00:00:00:01", GATEWAY_IP)
    if kind is K.VM_TO_VM_REQUEST:
        return make_arp_request("10.0.0.50", "02:aa:00:00:00:01", "10.0.0.60")
    if kind is K.GARP_VR_TO_VR:
        return make_garp(GATEWAY_IP, "02:bb:00:00:00:01")
    if kind is K.VR_TO_VM_REPLY:
        req = make_arp_request("10.0.0.50", "02:aa:00:00:00:01", GATEWAY_IP)
        return make_arp_reply(req, "02:bb:00:00:00:01")
    if kind is K.VM_TO_VR_REPLY:
        req = make_arp_request(GATEWAY_IP, "02:bb:00:00:00:01", "10.0.0.50")
        return make_arp_reply(req, "02:aa:00:00:00:02")
    req = make_arp_request("10.0.0.50", "02:aa:00:00:00:01", "10.0.0.60")
    return make_arp_reply(req, "02:aa:00:00:00:02")


def _state_for(mode: Mode, overloaded: bool) -> AgentState:
    state = AgentState(host="hX", tenant="tX", gateway_ip=GATEWAY_IP,
                       agent_mac="02:cc:00:00:00:01")
    if mode is Mode.NORMAL:
        state.vr_attached("02:bb:00:00:00:01")
    state.vport_util = 0.95 if overloaded else 0.0
    return state


def expected_for(mode: Mode, direction: Direction, kind: ArpKind,
                 facts: Dict[str, bool]) -> Tuple[Action, str]:
    for row_mode, row_dir, row_kind, constraints, action, rule in EXPECTED_ROWS:
        if (row_mode, row_dir, row_kind) != (mode, direction, kind):
            continue
        if all(facts.get(key) == value for key, value in constraints.items()):
            return action, rule
    raise KeyError(f"no expected row for {mode} {direction} {kind} {facts}")


def rules_conformance(decide_fn: Optional[Callable] = None) -> MatrixReport:
    """Sweep every coordinate and fact combination against the matrix.

    `decide_fn` defaults to the production engine; passing a variant lets the
    checker itself be checked (a corrupted rule must surface as a mismatch).
    """
    fn = decide_fn or decide
    report = MatrixReport()
    for mode, direction, kind in product(
            (N, O), (OUT, IN), list(ArpKind)):
        frame = _frame_for(kind)
        assert classify(frame, GATEWAY_IP) is kind
        for target_local, cache_hit, overloaded in product(
                (False, True), repeat=3):
            facts = {"target_local": target_local, "cache_hit": cache_hit,
                     "overloaded": overloaded}
            state = _state_for(mode, overloaded)
            view = LocalView(is_target_local=target_local,
                             is_sender_local=(direction is OUT),
                             cache_hit=cache_hit)
            decision = fn(state, kind, direction, frame, view)
            want_action, want_rule = expected_for(mode, direction, kind, facts)
            report.total += 1
            if (decision.action, decision.rule_id) != (want_action, want_rule):
                report.mismatches.append({
                    "mode": mode.value, "direction": direction.value,
                    "kind": kind.value, "facts": facts,
                    "expected": (want_action.value, want_rule),
                    "got": (decision.action.value, decision.rule_id),
                })

    # not-applicable coordinates must have no dataplane production, and every
    # actionable coordinate must have one
    seen_na: Dict[Tuple[Mode, Direction, ArpKind], bool] = {}
    for mode, direction, kind, _, action, rule in EXPECTED_ROWS:
        coord = (mode, direction, kind)
        is_na = action is Action.NOT_APPLICABLE
        seen_na.setdefault(coord, is_na)
        if is_na and coord in REACHABLE:
            report.na_violations.append(
                f"rule {rule}: marked not-applicable but coordinate "
                f"{mode.value}/{direction.value}/{kind.value} is producible")
        if not is_na and coord not in REACHABLE:
            report.na_violations.append(
                f"rule {rule}: actionable but coordinate "
                f"{mode.value}/{direction.value}/{kind.value} has no "
                f"producer in the census")
    return report


def format_matrix(report: MatrixReport) -> str:
    lines = [f"{'mode':<8}{'dir':<6}{'kind':<22}{'facts':<34}{'rule':<14}action"]
    for mode, direction, kind in product((N, O), (OUT, IN), list(ArpKind)):
        rows = [(c, a, r) for m, d, k, c, a, r in EXPECTED_ROWS
                if (m, d, k) == (mode, direction, kind)]
        for constraints, action, rule in rows:
            facts = ",".join(f"{k}={v}" for k, v in constraints.items()) or "-"
            lines.append(f"{mode.value:<8}{direction.value:<6}"
                         f"{kind.value:<22}{facts:<34}{rule:<14}{action.value}")
    lines.append("")
    lines.append(f"checked {report.total} combinations; "
                 f"{len(report.mismatches)} mismatches; "
                 f"{len(report.na_violations)} census violations")
    for m in report.mismatches:
        lines.append(f"MISMATCH {m}")
    for v in report.na_violations:
        lines.append(f"CENSUS {v}")
    return "\n".join(lines)
