"""Ready-made worlds for the standard experiments (halving migration, forks)."""

from __future__ import annotations

from dataclasses import dataclass

from .chain import ForkStats, fork_statistics
from .economics import CoinSpec, HashMarket, PriceModel, preset
from .mining import MinerActor
from .network import LatencyModel
from .world import World

BASE_LATENCY = LatencyModel("lognormal", 6.5, 12.6)


# --------------------------------------------------------------------------
# two coins, one hash family, one halving


@dataclass
class HalvingResult:
    t_halving: float
    before: float
    after: float
    series: list[tuple[float, float]]

    @property
    def ratio(self) -> float:
        return self.after / self.before if self.before else float("nan")


def two_coin_world(seed: int, *, halving_height: int = 100, small_miners: int = 200,
                   big_miners: int = 200, size_ratio: float = 100.0, responsiveness: float = 0.2,
                   tick: float = 600.0, single_coin: bool = False) -> tuple[World, HashMarket]:
    """Coin A (halves at ``halving_height``) next to a coin B ``size_ratio`` times bigger.

    Both have 600 s blocks and fixed prices chosen so that every miner earns
    the same per unit of hash before the halving.
    """
    spec_a = CoinSpec("A", "sha256d", 600.0, 10 ** 9, ((0, 50.0), (halving_height, 25.0)))
    spec_b = CoinSpec("B", "sha256d", 600.0, 10 ** 9, ((0, 50.0),))
    w = World(seed, check_txs=False)
    w.add_coin(spec_a, float(small_miners) * 600.0, price=PriceModel("A", "fixed", {"price": 1.0}))
    if not single_coin:
        w.add_coin(spec_b, float(small_miners) * size_ratio * 600.0,
                   price=PriceModel("B", "fixed", {"price": size_ratio}))
    w.add_node("n0")
    market = HashMarket("sha256d", migration_responsiveness=responsiveness, tick_interval=tick)
    for i in range(small_miners):
        m = w.add_miner(MinerActor(f"a{i}", 1.0, "A", node="n0"))
        market.participants[m.id] = m
    if not single_coin:
        per = small_miners * size_ratio / big_miners
        for i in range(big_miners):
            m = w.add_miner(MinerActor(f"b{i}", per, "B", node="n0"))
            market.participants[m.id] = m
    w.add_market(market)
    return w, market


def run_halving(seed: int, ticks_after: int = 50, **kw) -> HalvingResult:
    """Hash rate of coin A just before its halving and ``ticks_after`` ticks later."""
    w, market = two_coin_world(seed, **kw)
    halving = w.coins["A"].spec.reward_schedule[1][0] if len(w.coins["A"].spec.reward_schedule) > 1 else None
    series: list[tuple[float, float]] = []
    state = {"t0": None, "before": None}

    def watch(node_id, coin, block, result) -> None:
        if coin == "A" and halving is not None and block.height == halving - 1 and state["t0"] is None:
            state["t0"] = w.now
            state["before"] = w.coin_hash_rate("A")

    w.block_listeners.append(watch)
    w.start()
    while state["t0"] is None:
        w.run_until(w.now + market.tick_interval)
        series.append((w.now, w.coin_hash_rate("A")))
    end = state["t0"] + ticks_after * market.tick_interval
    while w.now < end:
        w.run_until(min(end, w.now + market.tick_interval))
        series.append((w.now, w.coin_hash_rate("A")))
    return HalvingResult(state["t0"], state["before"], w.coin_hash_rate("A"), series)


# --------------------------------------------------------------------------
# forks under propagation delay


def fork_world(seed: int, latency: LatencyModel, n_nodes: int = 8) -> World:
    """Equal miners on ``n_nodes`` fully connected nodes, 600 s blocks, no retargets."""
    spec = preset("BTC", retarget_interval=10 ** 9)
    w = World(seed, latency=latency, check_txs=False)
    w.add_coin(spec, 600.0)
    for i in range(n_nodes):
        w.add_node(f"n{i}")
        w.add_miner(MinerActor(f"m{i}", 1.0 / n_nodes, spec.label, node=f"n{i}"))
    return w


def measure_forks(seed: int, latency: LatencyModel, n_blocks: int, n_nodes: int = 8) -> ForkStats:
    w = fork_world(seed, latency, n_nodes)
    w.run_until(600.0 * n_blocks)
    return fork_statistics(w.nodes["n0"].tree("BTC"))


def tune_latency_scale(target: float = 0.01, seed: int = 10_000, pilot_blocks: int = 20_000,
                       start: float = 0.5, base: LatencyModel = BASE_LATENCY, rounds: int = 2) -> float:
    """Scale factor on ``base`` latency giving a fork rate near ``target``.

    Fork rate is close to proportional to delay at these levels, so a couple
    of proportional corrections from pilot runs suffice.
    """
    scale = start
    for r in range(rounds):
        stats = measure_forks(seed + r, base.scaled(scale), pilot_blocks)
        if stats.fork_rate <= 0:
            scale *= 2
            continue
        scale *= target / stats.fork_rate
    return scale
