"""Event core determinism and the max-min fair solver against its oracle."""

import math

import pytest
from hypothesis import given, settings, strategies as st

from eywasim.simcore import (
    Engine,
    FlowDemand,
    SchedulingError,
    SolverError,
    account,
    is_max_min_fair,
    solve_flows,
    to_ns,
    to_s,
)


class TestEngine:
    def test_events_run_in_time_order(self):
        eng = Engine()
        seen = []
        eng.schedule(0.3, lambda: seen.append("c"))
        eng.schedule(0.1, lambda: seen.append("a"))
        eng.schedule(0.2, lambda: seen.append("b"))
        eng.run_until(1.0)
        assert seen == ["a", "b", "c"]
        assert eng.clock.now == 1.0

    def test_ties_run_in_schedule_order(self):
        eng = Engine()
        seen = []
        for tag in ("first", "second", "third"):
            eng.schedule(0.5, lambda t=tag: seen.append(t))
        eng.run_until(1.0)
        assert seen == ["first", "second", "third"]

    def test_handlers_can_schedule_more_events(self):
        eng = Engine()
        seen = []

        def chain(n):
            seen.append(n)
            if n < 3:
                eng.schedule(0.1, lambda: chain(n + 1))

        eng.schedule(0.0, lambda: chain(0))
        eng.run_until(1.0)
        assert seen == [0, 1, 2, 3]

    def test_negative_delay_rejected(self):
        eng = Engine()
        with pytest.raises(SchedulingError):
            eng.schedule(-0.1, lambda: None)

    def test_events_past_horizon_stay_queued(self):
        eng = Engine()
        seen = []
        eng.schedule(2.0, lambda: seen.append("late"))
        eng.run_until(1.0)
        assert seen == [] and eng.clock.now == 1.0
        eng.run_until(3.0)
        assert seen == ["late"]

    def test_integer_clock_roundtrip(self):
        assert to_s(to_ns(0.1)) == pytest.approx(0.1)
        assert to_ns(0.1) == 100_000_000


class TestSolver:
    def test_single_flow_takes_bottleneck(self):
        links = {"l1": 1e9, "l2": 5e8}
        demands = [FlowDemand("f", ["l1", "l2"])]
        rates = solve_flows(demands, links)
        assert rates["f"] == pytest.approx(5e8)
        assert is_max_min_fair(demands, links, rates)

    def test_three_flows_share_equally(self):
        links = {"l": 1e9}
        demands = [FlowDemand(f"f{i}", ["l"]) for i in range(3)]
        rates = solve_flows(demands, links)
        for i in range(3):
            assert rates[f"f{i}"] == pytest.approx(1e9 / 3)
        assert is_max_min_fair(demands, links, rates)

    def test_disjoint_flows_independent(self):
        links = {f"l{i}": 1e9 for i in range(10)}
        demands = [FlowDemand(f"f{i}", [f"l{i}"]) for i in range(10)]
        rates = solve_flows(demands, links)
        assert all(rates[f"f{i}"] == pytest.approx(1e9) for i in range(10))

    def test_bounded_demand_frees_capacity(self):
        links = {"l": 1e9}
        demands = [FlowDemand("small", ["l"], demand_bps=2e8),
                   FlowDemand("big", ["l"])]
        rates = solve_flows(demands, links)
        assert rates["small"] == pytest.approx(2e8)
        assert rates["big"] == pytest.approx(8e8)
        assert is_max_min_fair(demands, links, rates)

    def test_unbounded_flow_continues_past_first_freeze(self):
        """Regression: an infinite-demand flow must keep filling after other
        flows freeze at a shared link's first saturation level."""
        links = {"nicA": 1e9, "nicA2": 1e9, "host": 2e9, "nicB": 1e9,
                 "ext": 100e9}
        demands = [FlowDemand("ns", ["nicA2", "host", "ext"])]
        demands += [FlowDemand(f"ew{j}", ["nicA", "host", "nicB"])
                    for j in range(5)]
        rates = solve_flows(demands, links)
        assert rates["ns"] == pytest.approx(1e9)
        assert all(rates[f"ew{j}"] == pytest.approx(2e8) for j in range(5))
        assert is_max_min_fair(demands, links, rates)

    def test_validation(self):
        with pytest.raises(SolverError):
            solve_flows([FlowDemand("f", [])], {})
        with pytest.raises(SolverError):
            solve_flows([FlowDemand("f", ["nope"])], {"l": 1.0})
        with pytest.raises(SolverError):
            solve_flows([FlowDemand("f", ["l"]), FlowDemand("f", ["l"])],
                        {"l": 1.0})

    @settings(max_examples=80, deadline=None)
    @given(st.data())
    def test_random_networks_are_max_min_fair(self, data):
        n_links = data.draw(st.integers(1, 6))
        links = {f"l{i}": data.draw(st.floats(1e6, 1e9)) for i in range(n_links)}
        n_flows = data.draw(st.integers(1, 8))
        demands = []
        for f in range(n_flows):
            path = data.draw(st.lists(
                st.sampled_from(sorted(links)), min_size=1,
                max_size=n_links, unique=True))
            demand = data.draw(st.one_of(
                st.just(math.inf), st.floats(1e5, 2e9)))
            demands.append(FlowDemand(f"f{f}", path, demand))
        rates = solve_flows(demands, links)
        assert is_max_min_fair(demands, links, rates)


class TestAccount:
    def test_bytes_per_link(self):
        rates = {"f1": 8e8, "f2": 8e8}
        paths = {"f1": ["a", "b"], "f2": ["b"]}
        out = account(rates, paths, dt_s=0.5)
        assert out["a"] == pytest.approx(5e7)
        assert out["b"] == pytest.approx(1e8)

    def test_rejects_nonpositive_interval(self):
        with pytest.raises(SolverError):
            account({}, {}, 0.0)
