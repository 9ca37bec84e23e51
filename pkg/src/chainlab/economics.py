"""Coin specifications, reward schedules, prices, and the hash-power market.

Amounts are floats in coin units.  Genesis (height 0) mints nothing, so the
supply on a chain is the sum of :func:`reward_at` over heights ``1..tip``.
"""

from __future__ import annotations

import bisect
import csv
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

UNBOUNDED = None


class DivergentSeries(ValueError):
    """Geometric series with ratio >= 1 summed to infinity."""


class InsufficientRentableHash(RuntimeError):
    pass


class UnknownPreset(KeyError):
    pass


@dataclass(frozen=True)
class CoinSpec:
    label: str
    hash_family: str
    block_time_target: float
    retarget_interval: int
    reward_schedule: tuple[tuple[int, float], ...]
    max_supply: float | None = None
    merged_mining_parent: str | None = None

    def __post_init__(self) -> None:
        heights = [h for h, _ in self.reward_schedule]
        if not heights or heights[0] not in (0, 1):
            raise ValueError(f"{self.label}: schedule must start at height 0 or 1")
        if any(b <= a for a, b in zip(heights, heights[1:])):
            raise ValueError(f"{self.label}: schedule heights must be strictly increasing")
        if any(r < 0 for _, r in self.reward_schedule):
            raise ValueError(f"{self.label}: negative reward")
        if self.block_time_target <= 0 or self.retarget_interval <= 0:
            raise ValueError(f"{self.label}: block time and retarget interval must be positive")

    @cached_property
    def _starts(self) -> list[int]:
        return [max(h, 1) for h, _ in self.reward_schedule]

    @cached_property
    def _minted_before(self) -> list[float]:
        # uncapped coins minted at heights [1, start_i)
        out = [0.0]
        for (h0, r0), h1 in zip(self.reward_schedule, self._starts[1:]):
            out.append(out[-1] + r0 * (h1 - max(h0, 1)))
        return out

    def scheduled_reward(self, height: int) -> float:
        if height <= 0:
            return 0.0
        i = bisect.bisect_right(self._starts, height) - 1
        return self.reward_schedule[i][1]

    def uncapped_supply(self, height: int) -> float:
        """Coins minted at heights 1..height ignoring ``max_supply``."""
        if height <= 0:
            return 0.0
        i = bisect.bisect_right(self._starts, height) - 1
        return self._minted_before[i] + self.reward_schedule[i][1] * (height - self._starts[i] + 1)


def reward_at(coin: CoinSpec, height: int) -> float:
    """Block reward at ``height``; zero at genesis and once the cap is hit."""
    r = coin.scheduled_reward(height)
    if coin.max_supply is None or r == 0.0:
        return r
    before = coin.uncapped_supply(height - 1)
    return max(0.0, min(r, coin.max_supply - before))


def supply_at(coin: CoinSpec, height: int) -> float:
    s = coin.uncapped_supply(height)
    return s if coin.max_supply is None else min(s, coin.max_supply)


def schedule_drop_factor(coin: CoinSpec, transition_index: int) -> float:
    """reward_before / reward_after at schedule boundary ``transition_index``.

    Index 0 is the first change of reward (the boundary between segment 0
    and segment 1); negative indices count from the end.
    """
    sched = coin.reward_schedule
    n = len(sched) - 1
    if not -n <= transition_index < n:
        raise IndexError(f"{coin.label} has {n} transitions")
    i = transition_index % n
    before, after = sched[i][1], sched[i + 1][1]
    # decimal strings keep ratios such as 0.03125/0.0001 exact
    return float(Fraction(str(before)) / Fraction(str(after)))


def halving_schedule(initial: float, interval: int, *, floor: float = 1e-8,
                     tail: float = 0.0) -> tuple[tuple[int, float], ...]:
    out = [(0, float(initial))]
    r, h = float(initial), 0
    while True:
        r /= 2
        h += interval
        if r < floor:
            out.append((h, tail))
            return tuple(out)
        out.append((h, r))


_UNO_TABLE = (
    (0, 1.0),
    (102_000, 0.5),
    (204_000, 0.25),
    (300_000, 0.125),
    (408_000, 0.0625),
    (510_000, 0.03125),
    (612_000, 0.0001),
)

_DOGE_SCHEDULE = tuple((i * 100_000, 500_000.0 / 2 ** i) for i in range(6)) + ((600_000, 9_893.0),)

PRESETS: dict[str, CoinSpec] = {
    "BTC": CoinSpec("BTC", "sha256d", 600.0, 2016, halving_schedule(50.0, 210_000), 21e6),
    "UNO": CoinSpec("UNO", "sha256d", 74.4, 2016, _UNO_TABLE, 250_000.0),
    "LTC": CoinSpec("LTC", "scrypt", 150.0, 2016, halving_schedule(50.0, 840_000), 84e6),
    "DOGE": CoinSpec("DOGE", "scrypt", 60.0, 240, _DOGE_SCHEDULE, None),
}


def preset(label: str, **overrides) -> CoinSpec:
    try:
        spec = PRESETS[label]
    except KeyError:
        raise UnknownPreset(label) from None
    return replace(spec, **overrides) if overrides else spec


# --------------------------------------------------------------------------
# prices


@dataclass
class PriceModel:
    """Coin price over time.

    ``family`` is one of ``fixed`` (``params['price']``), ``exogenous_series``
    (``params['times']``/``params['prices']``, step-wise, or loaded with
    :meth:`from_csv`) or ``elastic`` (``base * exp(growth * t)``, a demand
    index in price units).
    """

    coin: str
    family: str = "fixed"
    params: dict = field(default_factory=lambda: {"price": 1.0})

    def __post_init__(self) -> None:
        if self.family not in ("fixed", "exogenous_series", "elastic"):
            raise ValueError(f"unknown price family {self.family!r}")
        if self.family == "exogenous_series":
            prices = self.params["prices"]
            if any(p < 0 for p in prices):
                raise ValueError("negative price in series")

    @classmethod
    def from_csv(cls, coin: str, path: str | Path) -> "PriceModel":
        times, prices = [], []
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != ["time_s", "price"]:
                raise ValueError(f"{path}: expected header time_s,price")
            for row in reader:
                times.append(float(row["time_s"]))
                prices.append(float(row["price"]))
        return cls(coin, "exogenous_series", {"times": times, "prices": prices})

    def price(self, t: float) -> float:
        if self.family == "fixed":
            return float(self.params.get("price", 1.0))
        if self.family == "elastic":
            return max(0.0, self.params.get("base", 1.0) * math.exp(self.params.get("growth", 0.0) * t))
        times = self.params["times"]
        i = bisect.bisect_right(times, t) - 1
        return float(self.params["prices"][max(i, 0)])


# --------------------------------------------------------------------------
# profitability and migration


@dataclass
class CoinMarket:
    """Snapshot of one coin as seen by the hash market."""

    spec: CoinSpec
    hash_rate: float
    next_height: int
    price: float = 1.0
    block_time: float | None = None   # None: difficulty tracks hash, use target
    mean_fees: float = 0.0

    @property
    def block_value(self) -> float:
        return (reward_at(self.spec, self.next_height) + self.mean_fees) * self.price

    @property
    def value_rate(self) -> float:
        """Currency per second paid to all miners of this coin together."""
        bt = self.block_time if self.block_time is not None else self.spec.block_time_target
        return self.block_value / bt


def profitability(miner, coin: CoinMarket) -> float:
    """Currency per second earned by ``miner`` on ``coin`` net of electricity.

    ``coin.hash_rate`` is the coin's total, and is assumed to already include
    the miner.
    """
    if coin.hash_rate <= 0:
        raise ValueError("coin hash rate must be positive")
    return coin.value_rate * miner.hash_rate / coin.hash_rate - miner.electricity_cost


def _prospective(miner, coin: CoinMarket) -> float:
    """Profitability if ``miner`` were to join ``coin``."""
    joined = coin.hash_rate + (0.0 if miner.coin_assignment == coin.spec.label else miner.hash_rate)
    return coin.value_rate * miner.hash_rate / joined - miner.electricity_cost


@dataclass(frozen=True)
class Reassignment:
    miner_id: str
    from_coin: str | None
    to_coin: str | None


@dataclass
class HashMarket:
    """Hash power shared by every coin of one hash family.

    ``participants`` maps miner id to miner; miners are any objects with
    ``hash_rate``, ``electricity_cost``, ``coin_assignment``, ``responsive``
    and ``leased_to`` attributes.
    """

    family: str
    participants: dict = field(default_factory=dict)
    migration_responsiveness: float = 0.2
    tick_interval: float = 600.0
    rental_pool: float = 0.0
    rental_price: float | None = None

    def assigned(self, coin: str) -> float:
        return sum(m.hash_rate for m in self.participants.values()
                   if m.coin_assignment == coin and m.leased_to is None)

    def idle(self) -> float:
        return sum(m.hash_rate for m in self.participants.values()
                   if m.coin_assignment is None and m.leased_to is None)

    def rented_out(self) -> float:
        return sum(m.hash_rate for m in self.participants.values() if m.leased_to is not None)

    def total(self) -> float:
        return sum(m.hash_rate for m in self.participants.values())


def equilibrium_allocation(coins: Sequence[CoinMarket], active_hash: float) -> dict[str, float]:
    """Hash per coin at which every coin pays the same per unit of hash."""
    weights = {c.spec.label: c.value_rate for c in coins}
    total = sum(weights.values())
    if total <= 0:
        return {k: 0.0 for k in weights}
    return {k: active_hash * w / total for k, w in weights.items()}


def migrate(market: HashMarket, coins: Sequence[CoinMarket],
            stream: np.random.Generator) -> list[Reassignment]:
    """One market tick of profit-seeking migration inside ``market.family``.

    Hash on over-paid-for coins (more hash than the equal-profitability
    allocation) leaves with probability ``responsiveness * excess / hash``
    per miner, heading to the coin with the best pay per unit of hash.
    Miners losing money on every coin switch off; idle miners return once
    some coin is profitable for them.  The market is not mutated.
    """
    coins = [c for c in coins if c.spec.hash_family == market.family]
    if not coins:
        return []
    r = market.migration_responsiveness
    by_label = {c.spec.label: c for c in coins}
    miners = [(mid, m) for mid, m in sorted(market.participants.items())
              if m.leased_to is None and m.responsive]
    deltas: list[Reassignment] = []

    def best_for(m) -> tuple[str, float]:
        scored = [(_prospective(m, c), c.spec.label) for c in coins]
        prof, label = max(scored, key=lambda x: (x[0], -coins.index(by_label[x[1]])))
        return label, prof

    # switch-off / switch-on
    remaining = []
    for mid, m in miners:
        label, prof = best_for(m)
        if m.coin_assignment is None:
            if prof > 0 and stream.random() < r:
                deltas.append(Reassignment(mid, None, label))
            continue
        if prof < 0:
            deltas.append(Reassignment(mid, m.coin_assignment, None))
            continue
        remaining.append((mid, m))

    if len(coins) < 2:
        return deltas
    current = {c.spec.label: c.hash_rate for c in coins}
    active = sum(current.values())
    target = equilibrium_allocation(coins, active)

    def pay_per_hash(label: str) -> float:
        h = current[label]
        return math.inf if h <= 0 else by_label[label].value_rate / h

    under = [c.spec.label for c in coins if current[c.spec.label] < target[c.spec.label]]
    if not under:
        return deltas
    dest = max(under, key=pay_per_hash)
    for mid, m in remaining:
        src = m.coin_assignment
        if src not in current or src == dest:
            continue
        excess = current[src] - target[src]
        if excess <= 0 or current[src] <= 0:
            continue
        if stream.random() < r * excess / current[src]:
            deltas.append(Reassignment(mid, src, dest))
    return deltas


def apply_reassignments(market: HashMarket, deltas: Iterable[Reassignment]) -> None:
    for d in deltas:
        market.participants[d.miner_id].coin_assignment = d.to_coin


# --------------------------------------------------------------------------
# analytics


def investor_return(first_period_income, decay, periods: int | None = UNBOUNDED):
    """Total of an income stream shrinking by ``decay`` each period.

    Works on floats or :class:`fractions.Fraction` (exact).
    """
    if periods is UNBOUNDED:
        if not 0 <= decay < 1:
            raise DivergentSeries(f"decay={decay} does not converge")
        return first_period_income / (1 - decay)
    if periods < 0:
        raise ValueError("periods must be non-negative")
    if decay == 1:
        return first_period_income * periods
    return first_period_income * (1 - decay ** periods) / (1 - decay)


def attack_cost_estimate(coin: CoinMarket, blocks_to_mine: int, premium: float,
                         rentable_hash: float | None = None) -> float:
    """Competitive-rental bound on the cost of mining ``blocks_to_mine`` blocks.

    Renting hash at the rate miners earn plus ``premium`` costs one block's
    value (reward plus fees, at the current price) times ``1 + premium``
    per block found.
    """
    if blocks_to_mine <= 0:
        return 0.0
    if rentable_hash is not None and rentable_hash <= 0:
        raise InsufficientRentableHash(f"no rentable hash for {coin.spec.label}")
    return blocks_to_mine * coin.block_value * (1 + premium)
