"""Deterministic discrete-event core and fluid max-min fair flow solver.

Control frames (ARP, probes, VRRP adverts) are discrete events; data traffic
is fluid: steady-state rates come from progressive-filling max-min fairness
over capacitated links, recomputed whenever the active flow set changes.
Time is integer nanoseconds so event order never depends on float rounding.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Hashable, List, Optional, Tuple

NS = 1_000_000_000

SOLVER_REL_TOL = 1e-9


def to_ns(seconds: float) -> int:
    return round(seconds * NS)


def to_s(ns: int) -> float:
    return ns / NS


class SchedulingError(ValueError):
    pass


@dataclass(order=True)
class Event:
    time_ns: int
    seq: int
    handler: Callable[[], None] = field(compare=False)
    label: str = field(compare=False, default="")


class EventQueue:
    """Total order (timestamp, insertion sequence); ties run in schedule order."""

    def __init__(self):
        self._heap: List[Event] = []
        self._seq = 0

    def push(self, time_ns: int, handler: Callable[[], None], label: str = "") -> None:
        self._seq += 1
        heapq.heappush(self._heap, Event(time_ns, self._seq, handler, label))

    def pop(self) -> Event:
        return heapq.heappop(self._heap)

    def peek_time(self) -> Optional[int]:
        return self._heap[0].time_ns if self._heap else None

    def __len__(self):
        return len(self._heap)


class Clock:
    def __init__(self):
        self.now_ns = 0

    @property
    def now(self) -> float:
        return to_s(self.now_ns)


class Engine:
    """Single-threaded event executor with a monotonic integer clock."""

    def __init__(self):
        self.clock = Clock()
        self.queue = EventQueue()
        self.events_run = 0

    def schedule(self, delay_s: float, handler: Callable[[], None],
                 label: str = "") -> None:
        delay_ns = to_ns(delay_s)
        if delay_ns < 0:
            raise SchedulingError(f"negative delay {delay_s}")
        self.queue.push(self.clock.now_ns + delay_ns, handler, label)

    def schedule_at(self, time_s: float, handler: Callable[[], None],
                    label: str = "") -> None:
        time_ns = to_ns(time_s)
        if time_ns < self.clock.now_ns:
            raise SchedulingError(f"cannot schedule in the past: {time_s}")
        self.queue.push(time_ns, handler, label)

    def run_until(self, t_end_s: float) -> None:
        """Execute events in order until the queue drains or clock > t_end."""
        t_end_ns = to_ns(t_end_s)
        while len(self.queue):
            nxt = self.queue.peek_time()
            if nxt is None or nxt > t_end_ns:
                break
            event = self.queue.pop()
            assert event.time_ns >= self.clock.now_ns
            self.clock.now_ns = event.time_ns
            event.handler()
            self.events_run += 1
        if self.clock.now_ns < t_end_ns:
            self.clock.now_ns = t_end_ns


# ---------------------------------------------------------------------------
# Max-min fair allocation

LinkId = Hashable


@dataclass
class FlowDemand:
    flow_id: str
    path: List[LinkId]
    demand_bps: float = math.inf


class SolverError(ValueError):
    pass


def solve_flows(demands: List[FlowDemand],
                links: Dict[LinkId, float]) -> Dict[str, float]:
    """Progressive-filling max-min fair allocation.

    All unfrozen flows rise at the same rate; whenever a link saturates (or a
    flow meets its demand) the affected flows freeze at the current level.
    Deterministic: iteration order is input order / sorted link keys.
    """
    rates: Dict[str, float] = {}
    active: Dict[str, FlowDemand] = {}
    for d in demands:
        if not d.path:
            raise SolverError(f"flow {d.flow_id}: empty path")
        for link in d.path:
            if link not in links:
                raise SolverError(f"flow {d.flow_id}: unknown link {link!r}")
        if d.flow_id in active:
            raise SolverError(f"duplicate flow id {d.flow_id}")
        rates[d.flow_id] = 0.0
        active[d.flow_id] = d

    remaining = dict(links)
    # link -> unfrozen flows traversing it (a flow may cross a link once only;
    # paths are loop-free by construction)
    on_link: Dict[LinkId, set] = {}
    for d in active.values():
        for link in d.path:
            on_link.setdefault(link, set()).add(d.flow_id)

    level = 0.0
    while active:
        step = math.inf
        for link in on_link:
            n = len(on_link[link])
            if n:
                step = min(step, remaining[link] / n)
        for d in active.values():
            step = min(step, d.demand_bps - level)
        if not math.isfinite(step):
            # every remaining flow is unbounded and crosses no finite link
            break
        step = max(step, 0.0)
        level += step

        for link in on_link:
            n = len(on_link[link])
            if n:
                remaining[link] -= step * n

        frozen = []
        for fid, d in active.items():
            if (math.isfinite(d.demand_bps) and d.demand_bps - level
                    <= SOLVER_REL_TOL * max(1.0, d.demand_bps)):
                frozen.append(fid)
                continue
            for link in d.path:
                cap = links[link]
                if remaining[link] <= SOLVER_REL_TOL * max(1.0, cap):
                    frozen.append(fid)
                    break
        if not frozen:
            if step == 0.0:
                break
            continue
        for fid in frozen:
            rates[fid] = level
            d = active.pop(fid)
            for link in d.path:
                on_link[link].discard(fid)
        on_link = {l: s for l, s in on_link.items() if s}

    for fid in active:
        rates[fid] = level
    return rates


def is_max_min_fair(demands: List[FlowDemand], links: Dict[LinkId, float],
                    rates: Dict[str, float], rel_tol: float = 1e-6) -> bool:
    """Independent water-filling check used as the solver's oracle.

    Feasible, and every flow either meets its demand or has a bottleneck: a
    saturated link on its path where it holds a maximal rate.
    """
    load: Dict[LinkId, float] = {l: 0.0 for l in links}
    for d in demands:
        r = rates[d.flow_id]
        if r < -rel_tol or r > d.demand_bps * (1 + rel_tol):
            return False
        for link in d.path:
            load[link] += r
    for link, cap in links.items():
        if load[link] > cap * (1 + rel_tol) + rel_tol:
            return False
    for d in demands:
        r = rates[d.flow_id]
        if r >= d.demand_bps * (1 - rel_tol):
            continue
        bottleneck = False
        for link in d.path:
            saturated = load[link] >= links[link] * (1 - rel_tol)
            if not saturated:
                continue
            peers = [rates[o.flow_id] for o in demands if link in o.path]
            if r >= max(peers) * (1 - rel_tol):
                bottleneck = True
                break
        if not bottleneck:
            return False
    return True


def account(rates: Dict[str, float], paths: Dict[str, List[LinkId]],
            dt_s: float) -> Dict[LinkId, float]:
    """Advance byte counters: returns bytes carried per link over dt."""
    if dt_s <= 0:
        raise SolverError(f"non-positive accounting interval {dt_s}")
    out: Dict[LinkId, float] = {}
    for fid, rate in rates.items():
        for link in paths.get(fid, ()):
            out[link] = out.get(link, 0.0) + rate * dt_s / 8.0
    return out
