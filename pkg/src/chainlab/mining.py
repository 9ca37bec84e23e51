"""Miners, pools, work distribution, shares, difficulty and merged mining.

Mining itself is never ground out: a miner with hash rate ``h`` on a coin
whose blocks need ``D`` expected hashes finds blocks as a Poisson process of
rate ``h / D``.  Pools hand out :class:`WorkItem` objects whose disclosed
fields depend on the work protocol; under ``h0_only`` a member only sees an
opaque midstate and cannot tell which block it is extending.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .chain import Block, make_block
from .economics import CoinSpec
from .sim import sample_exponential


class ThresholdAboveDifficulty(ValueError):
    pass


class ProtocolDisclosureError(RuntimeError):
    """The work protocol cannot carry out the requested (hidden) template."""


MANAGER_STRATEGIES = ("honest", "hidden_fork", "cross_coin_redirect", "cartel")
WORK_PROTOCOLS = ("h0_only", "stratum_like")


@dataclass
class Difficulty:
    coin: str
    expected_hashes_per_block: float
    retarget_interval_blocks: int
    target_block_time: float

    def __post_init__(self) -> None:
        if not self.expected_hashes_per_block > 0:
            raise ValueError("expected_hashes_per_block must be positive")

    @classmethod
    def from_zeros(cls, coin: str, zeros: float, interval: int, block_time: float) -> "Difficulty":
        return cls(coin, 2.0 ** zeros, interval, block_time)

    @classmethod
    def for_hash_rate(cls, spec: CoinSpec, hash_rate: float) -> "Difficulty":
        """Difficulty at which ``hash_rate`` meets the coin's block time."""
        return cls(spec.label, hash_rate * spec.block_time_target, spec.retarget_interval,
                   spec.block_time_target)

    @property
    def target_zeros(self) -> float:
        return math.log2(self.expected_hashes_per_block)


def retarget(difficulty: Difficulty, recent_blocks: Sequence[Block],
             window_start: float | None = None, clamp: float = 4.0) -> Difficulty:
    """New difficulty from the timestamps of the last retarget window.

    With ``window_start`` (the timestamp of the block just before the window)
    the window spans ``len(recent_blocks)`` block intervals; without it, the
    first block's timestamp is the start and one interval fewer is counted.
    The adjustment factor is clamped to ``[1/clamp, clamp]``.
    """
    n = len(recent_blocks)
    if n != difficulty.retarget_interval_blocks:
        raise ValueError(f"need {difficulty.retarget_interval_blocks} blocks, got {n}")
    if window_start is None:
        start, intervals = recent_blocks[0].timestamp, n - 1
    else:
        start, intervals = window_start, n
    if intervals <= 0:
        raise ValueError("window spans no block interval")
    elapsed = recent_blocks[-1].timestamp - start
    expected = difficulty.target_block_time * intervals
    factor = clamp if elapsed <= 0 else expected / elapsed
    factor = min(clamp, max(1.0 / clamp, factor))
    return replace(difficulty, expected_hashes_per_block=difficulty.expected_hashes_per_block * factor)


@dataclass
class MinerActor:
    id: str
    hash_rate: float
    coin_assignment: str | None = None
    electricity_cost: float = 0.0
    pool: str | None = None
    protocol_awareness: str = "full_header"   # or h0_only
    node: str = "n0"
    responsive: bool = True
    accept_bribes: bool = False
    leased_to: str | None = None

    def __post_init__(self) -> None:
        if not self.hash_rate > 0:
            raise ValueError(f"miner {self.id}: hash_rate must be positive")


@dataclass
class PoolActor:
    id: str
    members: list[str] = field(default_factory=list)
    manager_strategy: str = "honest"
    work_protocol: str = "stratum_like"
    share_zeros: int = 32
    refresh_interval: float = 30.0

    def __post_init__(self) -> None:
        if self.manager_strategy not in MANAGER_STRATEGIES:
            raise ValueError(f"unknown manager strategy {self.manager_strategy!r}")
        if self.work_protocol not in WORK_PROTOCOLS:
            raise ValueError(f"unknown work protocol {self.work_protocol!r}")

    def hash_rate(self, miners: dict[str, MinerActor]) -> float:
        return sum(miners[m].hash_rate for m in self.members)


@dataclass(frozen=True)
class BlockTemplate:
    """What the pool manager actually wants mined."""

    coin: str
    parent_id: str
    tx_ids: tuple[str, ...] = ()
    payout: str = ""

    def midstate(self) -> str:
        # the compression state after the first 64 header bytes: opaque to members
        body = "|".join((self.coin, self.parent_id, *self.tx_ids, self.payout))
        return hashlib.sha256(body.encode()).hexdigest()


@dataclass(frozen=True)
class WorkItem:
    h0: str
    prev_id_disclosed: str | None
    coin_disclosed: str | None
    target_zeros: int
    job_id: int = 0

    def observable(self) -> tuple:
        """Fields a member can interpret.

        ``h0`` is a hash midstate: without the preimage it carries no usable
        information about the parent block or coin, so it is left out.
        """
        return (self.job_id, self.prev_id_disclosed, self.coin_disclosed, self.target_zeros)


@dataclass(frozen=True)
class PlaintextAwareWorkItem(WorkItem):
    """Work for a coin whose final hash mixes in the previous block id.

    The previous block id is mandatory; without it no valid digest exists.
    """

    def __post_init__(self) -> None:
        if self.prev_id_disclosed is None:
            raise ProtocolDisclosureError("plaintext-aware work needs the previous block id")


@dataclass(frozen=True)
class Share:
    miner: str
    job_id: int
    zeros: int
    found_at: float


def choose_template(pool: PoolActor, honest: BlockTemplate, *, secret: BlockTemplate | None = None,
                    other_coin: BlockTemplate | None = None) -> BlockTemplate:
    if pool.manager_strategy == "hidden_fork" and secret is not None:
        return secret
    if pool.manager_strategy == "cross_coin_redirect" and other_coin is not None:
        return other_coin
    return honest


def issue_work(pool: PoolActor, template: BlockTemplate, share_zeros: int | None = None,
               job_id: int = 0, plaintext_aware: bool = False) -> WorkItem:
    """Turn a template into the work item members receive."""
    zeros = pool.share_zeros if share_zeros is None else share_zeros
    h0 = template.midstate()
    if plaintext_aware:
        if pool.work_protocol == "h0_only":
            raise ProtocolDisclosureError("h0-only work cannot be hashed under plaintext-aware mining")
        return PlaintextAwareWorkItem(h0, template.parent_id, template.coin, zeros, job_id)
    if pool.work_protocol == "h0_only":
        return WorkItem(h0, None, None, zeros, job_id)
    return WorkItem(h0, template.parent_id, template.coin, zeros, job_id)


def detect_redirect(work: WorkItem, local_main_tip: str, recent_tips: Iterable[str] = ()) -> str:
    """``consistent``, ``redirected`` or ``undetectable`` from a member's view."""
    if work.prev_id_disclosed is None:
        return "undetectable"
    if work.prev_id_disclosed == local_main_tip or work.prev_id_disclosed in set(recent_tips):
        return "consistent"
    return "redirected"


def mine_step(actor: MinerActor, difficulty: Difficulty, stream: np.random.Generator,
              now: float = 0.0) -> float:
    """Time of the actor's next block on the coin it is assigned to."""
    return now + sample_exponential(stream, actor.hash_rate / difficulty.expected_hashes_per_block)


def expected_share_count(hash_rate: float, window: float, share_zeros: float) -> float:
    return hash_rate * window / 2.0 ** share_zeros


def count_shares(miner: MinerActor, window: tuple[float, float], difficulty: Difficulty,
                 share_zeros: int, stream: np.random.Generator) -> int:
    """Poisson number of shares found in ``window`` without materialising them."""
    if share_zeros > difficulty.target_zeros + 1e-9:
        raise ThresholdAboveDifficulty(f"{share_zeros} > {difficulty.target_zeros:.2f}")
    start, end = window
    return int(stream.poisson(expected_share_count(miner.hash_rate, end - start, share_zeros)))


def generate_shares(miner: MinerActor, window: tuple[float, float], difficulty: Difficulty,
                    share_zeros: int, stream: np.random.Generator, job_id: int = 0) -> list[Share]:
    """Shares a miner finds during ``window``.

    The count is Poisson with mean ``hash_rate * duration / 2**share_zeros``;
    each share beats the threshold by a geometric number of extra zero bits.
    """
    n = count_shares(miner, window, difficulty, share_zeros, stream)
    start, end = window
    if n == 0:
        return []
    times = np.sort(stream.uniform(start, end, n))
    extra = stream.geometric(0.5, n) - 1
    return [Share(miner.id, job_id, share_zeros + int(e), float(t)) for t, e in zip(times, extra)]


def apply_aux_pow(parent_coin_block: Block, child_coin: CoinSpec, child_parent: Block,
                  child_difficulty: Difficulty) -> Block | None:
    """Child-coin block carried by proof of work done on the parent coin.

    Returns ``None`` unless the child merges with the parent's coin and the
    parent proof carries at least the child's difficulty.
    """
    if child_coin.merged_mining_parent != parent_coin_block.coin:
        return None
    if parent_coin_block.difficulty < child_difficulty.expected_hashes_per_block:
        return None
    return make_block(child_coin, child_parent, parent_coin_block.miner, parent_coin_block.timestamp,
                      child_difficulty.expected_hashes_per_block,
                      aux_parent=parent_coin_block.block_id)
