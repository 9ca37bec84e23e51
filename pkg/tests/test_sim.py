import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chainlab.sim import (EventKind, NonPositiveRate, PastEvent, RngStreams, Simulator,
                          sample_exponential)


def test_schedule_future_grows_queue():
    sim = Simulator()
    sim.run_until(5.0)
    sim.schedule(10.0, EventKind.BLOCK_FOUND)
    assert len(sim) == 1


def test_schedule_at_now_allowed():
    sim = Simulator()
    sim.run_until(5.0)
    sim.schedule(5.0, EventKind.BLOCK_FOUND)
    assert len(sim) == 1


def test_schedule_in_past_rejected():
    sim = Simulator()
    sim.run_until(5.0)
    with pytest.raises(PastEvent):
        sim.schedule(4.9, EventKind.BLOCK_FOUND)


def test_run_until_empty_advances_clock():
    sim = Simulator()
    assert sim.run_until(100.0) == 0
    assert sim.now == 100.0


def test_run_until_partial():
    sim = Simulator()
    for t in (1.0, 2.0, 3.0):
        sim.schedule(t, EventKind.MARKET_TICK)
    assert sim.run_until(2.5) == 2
    assert len(sim) == 1


def test_ties_broken_by_sequence():
    sim = Simulator()
    order = []
    sim.schedule(1.0, EventKind.MSG_ARRIVAL, lambda: order.append("a"))
    sim.schedule(1.0, EventKind.MSG_ARRIVAL, lambda: order.append("b"))
    sim.run_until(2.0)
    assert order == ["a", "b"]


def test_handlers_and_cancel():
    sim = Simulator()
    seen = []
    sim.on(EventKind.BLOCK_FOUND, lambda ev: seen.append(ev.fire_at))
    sim.schedule(1.0, EventKind.BLOCK_FOUND)
    ev = sim.schedule(2.0, EventKind.BLOCK_FOUND)
    ev.cancel()
    sim.run_until(3.0)
    assert seen == [1.0]


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1e6, allow_nan=False), min_size=1, max_size=40))
def test_events_fire_in_time_order(times):
    sim = Simulator()
    fired = []
    for t in times:
        sim.schedule(t, EventKind.MSG_ARRIVAL, lambda t=t: fired.append(t))
    sim.run_until(max(times))
    assert fired == sorted(times)


def test_exponential_mean_large_sample():
    g = RngStreams(0)("exp")
    draws = g.exponential(10.0, 10 ** 6)
    assert abs(draws.mean() - 10.0) < 0.05
    assert abs(np.mean([sample_exponential(g, 0.1) for _ in range(10 ** 5)]) - 10.0) < 0.15


def test_exponential_block_interval():
    g = RngStreams(1)("blocks")
    mean = np.mean([sample_exponential(g, 1 / 600) for _ in range(20000)])
    assert mean == pytest.approx(600, rel=0.03)


@pytest.mark.parametrize("rate", [0.0, -1.0])
def test_exponential_rejects_non_positive(rate):
    with pytest.raises(NonPositiveRate):
        sample_exponential(RngStreams(0)("x"), rate)


def test_streams_are_independent_of_creation_order():
    a = RngStreams(42)
    a("other")
    x = a("miner:m0").random(5)
    y = RngStreams(42)("miner:m0").random(5)
    assert np.array_equal(x, y)
    assert not np.array_equal(y, RngStreams(43)("miner:m0").random(5))
