import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import example, given, settings
from hypothesis import strategies as st

from chainlab.economics import (CoinMarket, CoinSpec, DivergentSeries, HashMarket,
                                InsufficientRentableHash, PriceModel, UnknownPreset,
                                apply_reassignments, attack_cost_estimate, investor_return,
                                migrate, preset, profitability, reward_at,
                                schedule_drop_factor, supply_at)
from chainlab.experiments import run_halving
from chainlab.mining import MinerActor
from chainlab.sim import RngStreams


def test_reward_examples():
    assert reward_at(preset("UNO"), 50_000) == 1.0
    assert reward_at(preset("UNO"), 612_001) == 0.0001
    assert reward_at(preset("BTC"), 419_999) == 25.0
    assert reward_at(preset("BTC"), 420_000) == 12.5
    assert reward_at(preset("BTC"), 0) == 0.0


def test_drop_factors():
    assert schedule_drop_factor(preset("UNO"), -1) == 312.5
    btc = preset("BTC")
    assert all(schedule_drop_factor(btc, i) == 2.0 for i in range(10))


def test_doge_halvings_every_69_days():
    doge = preset("DOGE")
    for i in range(5):
        assert schedule_drop_factor(doge, i) == 2.0
    start, nxt = doge.reward_schedule[0][0], doge.reward_schedule[1][0]
    assert (nxt - start) * doge.block_time_target / 86400 == pytest.approx(69, abs=0.5)


def test_doge_tail_mints_per_year():
    doge = preset("DOGE")
    h0 = doge.reward_schedule[-1][0]
    per_year = int(365 * 86400 / doge.block_time_target)
    minted = supply_at(doge, h0 + per_year) - supply_at(doge, h0)
    assert minted == pytest.approx(5.2e9, rel=0.01)


def test_uno_supply_capped():
    uno = preset("UNO")
    assert supply_at(uno, 10 ** 8) <= 250_000.0
    assert math.fsum(reward_at(uno, h) for h in range(1, 700_000)) <= 250_000.0 + 1e-6


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.01, 100), min_size=1, max_size=5), st.integers(10, 1000),
       st.floats(1, 5000))
@example([0.01171875], 10, 6.0)     # cap never reached
def test_supply_never_exceeds_cap(rewards, seg, cap):
    sched = tuple((i * seg, r) for i, r in enumerate(rewards))
    coin = CoinSpec("X", "sha256d", 60.0, 100, sched, cap)
    top = seg * len(rewards) + 500
    total = math.fsum(reward_at(coin, h) for h in range(1, top + 1))
    assert total <= cap + 1e-6
    assert supply_at(coin, top) == pytest.approx(total)


def test_bad_schedules_rejected():
    with pytest.raises(ValueError):
        CoinSpec("X", "sha256d", 600.0, 10, ((0, 1.0), (0, 2.0)))
    with pytest.raises(ValueError):
        CoinSpec("X", "sha256d", 600.0, 10, ((0, -1.0),))
    with pytest.raises(UnknownPreset):
        preset("NOPE")


def _market(spec, hash_rate, price=1.0, height=1):
    return CoinMarket(spec, hash_rate, height, price)


def test_profitability_sole_miner():
    spec = CoinSpec("A", "sha256d", 600.0, 2016, ((0, 25.0),))
    m = MinerActor("m", 10.0, "A")
    assert profitability(m, _market(spec, 10.0)) == pytest.approx(25 / 600)


def test_profitability_halves_when_total_doubles():
    spec = CoinSpec("A", "sha256d", 600.0, 2016, ((0, 25.0),))
    m = MinerActor("m", 1.0, "A")
    assert profitability(m, _market(spec, 20.0)) == pytest.approx(profitability(m, _market(spec, 10.0)) / 2)


def test_profitability_net_of_electricity():
    spec = CoinSpec("A", "sha256d", 600.0, 2016, ((0, 25.0),))
    m = MinerActor("m", 1.0, "A", electricity_cost=0.01)
    assert profitability(m, _market(spec, 1.0)) == pytest.approx(25 / 600 - 0.01)


def test_price_models():
    assert PriceModel("A").price(1e6) == 1.0
    series = PriceModel("A", "exogenous_series", {"times": [0, 100], "prices": [2.0, 3.0]})
    assert series.price(50) == 2.0 and series.price(100) == 3.0
    assert PriceModel("A", "elastic", {"base": 2.0, "growth": 0.0}).price(9) == 2.0
    with pytest.raises(ValueError):
        PriceModel("A", "exogenous_series", {"times": [0], "prices": [-1.0]})


def test_price_csv(tmp_path):
    p = tmp_path / "p.csv"
    p.write_text("time_s,price\n0,1.5\n60,2.5\n")
    pm = PriceModel.from_csv("A", p)
    assert pm.price(30) == 1.5 and pm.price(61) == 2.5


def _two_coin_market(n_a, n_b, value_a=1.0, value_b=1.0, r=0.2):
    a = CoinSpec("A", "sha256d", 600.0, 2016, ((0, value_a),))
    b = CoinSpec("B", "sha256d", 600.0, 2016, ((0, value_b),))
    market = HashMarket("sha256d", migration_responsiveness=r)
    for i in range(n_a):
        market.participants[f"a{i}"] = MinerActor(f"a{i}", 1.0, "A")
    for i in range(n_b):
        market.participants[f"b{i}"] = MinerActor(f"b{i}", 1.0, "B")
    return market, a, b


def _snapshot(market, a, b):
    return [_market(a, market.assigned("A")), _market(b, market.assigned("B"))]


def test_equal_profitability_no_flow():
    market, a, b = _two_coin_market(50, 50)
    rng = RngStreams(0)("mkt")
    for _ in range(20):
        assert migrate(market, _snapshot(market, a, b), rng) == []


def test_identical_coins_drift_within_noise():
    market, a, b = _two_coin_market(55, 45)
    rng = RngStreams(1)("mkt")
    for _ in range(50):
        apply_reassignments(market, migrate(market, _snapshot(market, a, b), rng))
    assert abs(market.assigned("A") - 50) <= 3


def test_migration_per_tick_bounded_by_responsiveness():
    moved = []
    for seed in range(200):
        market, a, b = _two_coin_market(100, 0, r=0.2)
        d = migrate(market, [_market(a, 100.0), _market(b, 1e-9)], RngStreams(seed)("mkt"))
        moved.append(len(d))
    # excess is 50 of 100 so the expected move is 0.2 * 50 = 10 miners
    assert np.mean(moved) == pytest.approx(10, abs=1.0)
    assert max(moved) <= 100


def test_unprofitable_miners_switch_off():
    market, a, b = _two_coin_market(2, 2)
    for m in market.participants.values():
        m.electricity_cost = 1.0
    d = migrate(market, _snapshot(market, a, b), RngStreams(0)("mkt"))
    assert sorted(x.miner_id for x in d if x.to_coin is None) == ["a0", "a1", "b0", "b1"]
    apply_reassignments(market, d)
    assert market.idle() == 4.0
    total = market.assigned("A") + market.assigned("B") + market.idle() + market.rented_out()
    assert total == market.total()


def test_halving_migration_halves_hash():
    res = run_halving(0)
    assert 0.45 <= res.ratio <= 0.55


def test_single_coin_no_migration():
    res = run_halving(0, single_coin=True)
    assert res.ratio == 1.0


def test_investor_return_examples():
    assert investor_return(2000, 0.5) == 4000
    assert investor_return(1, 0.5) == 2
    assert investor_return(123.0, 0.3, periods=1) == 123.0
    assert investor_return(Fraction(2000), Fraction(1, 2), periods=3) == Fraction(3500)
    with pytest.raises(DivergentSeries):
        investor_return(1, 1.0)


@settings(max_examples=100)
@given(st.fractions(min_value=0, max_value=10 ** 6), st.fractions(min_value=0, max_value=Fraction(99, 100)))
def test_geometric_identity(x, d):
    assert investor_return(x, d) * (1 - d) == x


def test_attack_cost_examples():
    spec = CoinSpec("A", "sha256d", 600.0, 2016, ((0, 25.0),))
    assert attack_cost_estimate(_market(spec, 1.0, price=7.0), 6, 0.1) == pytest.approx(165 * 7.0)
    assert attack_cost_estimate(_market(spec, 1.0), 0, 0.1) == 0.0
    with pytest.raises(InsufficientRentableHash):
        attack_cost_estimate(_market(spec, 1.0), 1, 0.0, rentable_hash=0.0)


def test_doge_attack_budget():
    # price chosen so one block is worth 120 USD
    doge = preset("DOGE")
    height = doge.reward_schedule[-1][0] + 1
    price = 120.0 / reward_at(doge, height)
    cost = attack_cost_estimate(CoinMarket(doge, 1.0, height, price), 5, 0.0)
    assert cost == pytest.approx(600.0)
