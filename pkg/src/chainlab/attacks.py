"""Attack strategies run inside a :class:`~chainlab.world.World`.

The double spend works as a race between a secret branch and the public
chain.  By default the attacker first pre-mines one secret block holding the
replacement transaction and only then hands the victim its payment; if an
honest block lands first the attacker restarts on the new tip.  Once the
victim has shipped at ``z_wait`` confirmations the branch is published as
soon as it carries strictly more work than the public chain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial
from typing import Iterable

import numpy as np
from scipy import stats

from .chain import (Block, BlockTree, InvalidBlock, OutPoint, ReorgReport, Transaction, confirmations,
                    spend)
from .economics import CoinMarket, HashMarket, attack_cost_estimate, reward_at
from .mining import MinerActor, PoolActor, ProtocolDisclosureError
from .network import LatencyModel
from .sim import EventKind
from .world import DefenseConfig, World


class BudgetExhausted(RuntimeError):
    pass


class AlreadyConfirmed(RuntimeError):
    pass


# --------------------------------------------------------------------------
# analytic oracles


def catch_up_probability(q: float, z: int) -> float:
    """Chance an attacker with hash share ``q`` ever overtakes a ``z``-block lead.

    Poisson estimate of the attacker's progress while the honest chain mines
    ``z`` blocks, followed by gambler's ruin for the remaining deficit.
    """
    if not 0 <= q <= 1 or z < 0:
        raise ValueError("need 0 <= q <= 1 and z >= 0")
    p = 1.0 - q
    if q >= p:
        return 1.0
    lam = z * q / p
    ks = np.arange(z + 1)
    total = float(np.sum(stats.poisson.pmf(ks, lam) * (1.0 - (q / p) ** (z - ks))))
    return min(1.0, max(0.0, 1.0 - total))


def catch_up_probability_exact(q: float, z: int) -> float:
    """Exact race odds when the attacker holds one pre-mined block.

    The attacker's progress while honest miners find ``z`` blocks is
    negative binomial; a tie after the pre-mine is enough to overtake.
    """
    if not 0 <= q <= 1 or z < 0:
        raise ValueError("need 0 <= q <= 1 and z >= 0")
    p = 1.0 - q
    if q >= p:
        return 1.0
    if z == 0:
        return 1.0
    total = 0.0
    for k in range(z + 1):
        total += math.comb(k + z - 1, k) * (p ** z * q ** k - q ** z * p ** k)
    return min(1.0, max(0.0, 1.0 - total))


# --------------------------------------------------------------------------
# double spend


@dataclass
class DoubleSpendPlan:
    coin: str
    victim_tx: Transaction
    replacement_tx: Transaction
    z_wait: int
    attack_hash: float
    deadline: float | None = None      # seconds after the start; default 20 * z * block time
    budget: float = math.inf
    rental_price: float = 0.0           # currency per hash-second of rented hash
    premine: bool = True
    give_up_deficit: int | None = None
    victim_node: str | None = None

    def __post_init__(self) -> None:
        if not set(self.victim_tx.outpoints()) & set(self.replacement_tx.outpoints()):
            raise ValueError("victim and replacement transactions must spend a common output")
        if self.victim_tx.tx_id == self.replacement_tx.tx_id:
            raise ValueError("replacement must differ from the victim transaction")
        if self.attack_hash < 0:
            raise ValueError("attack_hash must be non-negative")

    @property
    def victim_amount(self) -> float:
        return math.fsum(o.amount for o in self.victim_tx.outputs)


@dataclass
class AttackOutcome:
    success: bool
    blocks_mined_secret: int
    elapsed: float
    spent: float
    revenue: float
    shipped: bool = False
    ship_time: float | None = None
    acceptance_time: float | None = None
    detected: bool = False
    aborted: str | None = None
    published: bool = False
    flags: tuple[str, ...] = ()

    @property
    def net(self) -> float:
        return self.revenue - self.spent

    def to_dict(self) -> dict:
        return {
            "success": self.success, "blocks_mined_secret": self.blocks_mined_secret,
            "elapsed": self.elapsed, "spent": self.spent, "revenue": self.revenue, "net": self.net,
            "shipped": self.shipped, "ship_time": self.ship_time, "acceptance_time": self.acceptance_time,
            "detected": self.detected, "aborted": self.aborted, "published": self.published,
            "flags": list(self.flags),
        }


class DoubleSpendAttack:
    """Controller for one double-spend race inside a world.

    ``rig`` hash (``plan.attack_hash``) is leased to the attacker; hash of an
    attacker-managed pool can be steered here too through
    :meth:`pool_template`.
    """

    def __init__(self, world: World, plan: DoubleSpendPlan, attacker_id: str = "attacker",
                 node_id: str | None = None) -> None:
        self.world = world
        self.plan = plan
        self.id = attacker_id
        self.node_id = node_id or f"{attacker_id}-node"
        if self.node_id not in world.nodes:
            world.add_node(self.node_id, honest=False)
        self.node = world.nodes[self.node_id]
        coin = world.coins[plan.coin]
        self.private = BlockTree(coin.spec, coin.genesis, check_txs=world.check_txs)
        self.victim_node = plan.victim_node or world.reference_node().id
        self.phase = "idle"
        self.base: Block | None = None
        self.secret: list[Block] = []
        self.secret_ids: set[str] = set()
        self.secret_found = 0
        self.shipped = False
        self.ship_time: float | None = None
        self.broadcast_at: float | None = None
        self.success = False
        self.published = False
        self.aborted: str | None = None
        self.start_time = 0.0
        self.end_time: float | None = None
        self.reorg: ReorgReport | None = None
        self.secrecy_violations = 0
        self.extra_hash: list[str] = []
        self.rig: str | None = None
        world.templates[self.id] = self.template
        world.block_listeners.append(self._on_block)

    # -- lifecycle -------------------------------------------------------

    @property
    def done(self) -> bool:
        return self.phase == "done"

    def rental_rate(self) -> float:
        return self.plan.attack_hash * self.plan.rental_price

    def start(self, at: float | None = None) -> None:
        at = self.world.now if at is None else at
        self.world.sim.schedule(at, EventKind.ATTACK_PHASE, self._begin)

    def _begin(self) -> None:
        w, plan = self.world, self.plan
        self.start_time = w.now
        if self.rental_rate() > 0 and plan.budget <= 0:
            raise BudgetExhausted("no budget to rent hash")
        deadline = plan.deadline
        if deadline is None:
            deadline = 20 * max(plan.z_wait, 1) * w.coins[plan.coin].spec.block_time_target
        w.sim.schedule(w.now + deadline, EventKind.ATTACK_PHASE, partial(self.finish, "deadline"))
        if self.rental_rate() > 0 and math.isfinite(plan.budget):
            w.sim.schedule(w.now + plan.budget / self.rental_rate(), EventKind.ATTACK_PHASE,
                           partial(self.finish, "BudgetExhausted"))
        self.base = self.node.tree(plan.coin).tip
        if plan.premine:
            self.phase = "premine"
        else:
            self.phase = "race"
            self._ship_payment()
        if plan.attack_hash > 0:
            self.rig = f"{self.id}:rig"
            w.add_miner(MinerActor(self.rig, plan.attack_hash, plan.coin, node=self.node_id,
                                   leased_to=self.id))
        for mid in self.extra_hash:
            w.reschedule(mid)

    def _ship_payment(self) -> None:
        self.broadcast_at = self.world.now
        self.world.broadcast_tx(self.plan.victim_tx, self.node_id, self.plan.coin)
        if self.plan.z_wait == 0:
            self.world.sim.schedule(self.world.now, EventKind.ATTACK_PHASE, self._check_ship)

    def finish(self, reason: str | None = None) -> None:
        if self.done:
            return
        self.aborted = None if self.success else reason
        self.phase = "done"
        self.end_time = self.world.now
        if self.rig is not None:
            rig = self.world.miners[self.rig]
            rig.coin_assignment = None
            self.world.reschedule(self.rig)
        for mid in self.extra_hash:
            self.world.reschedule(mid)

    # -- mining ----------------------------------------------------------

    def template(self, miner: MinerActor, coin: str):
        """Where attacker-controlled hash mines; ``None`` hands it back to honest work."""
        if self.phase not in ("premine", "race", "published") or coin != self.plan.coin:
            return None
        if self.phase == "published":
            return self.secret[-1], self._published_found, ()
        parent = self.secret[-1] if self.secret else self.base
        txs = () if self.secret else (self.plan.replacement_tx,)
        return parent, self._secret_found, txs

    pool_template = template

    def _secret_found(self, block: Block) -> None:
        self.secret_found += 1
        self.private.accept_block(block, self.world.now)
        self.secret.append(block)
        self.secret_ids.add(block.block_id)
        if self.phase == "premine":
            self.phase = "race"
            self._ship_payment()
        self._maybe_publish()

    def _published_found(self, block: Block) -> None:
        # keep extending our own branch until it wins, times out or gives up
        self.secret_found += 1
        self.private.accept_block(block, self.world.now)
        self.secret.append(block)
        self.secret_ids.add(block.block_id)
        self.world.submit_block(self.node_id, block)

    def _public_work(self) -> float:
        tree = self.node.tree(self.plan.coin)
        return tree.cumulative_work[tree.main_tip]

    def _maybe_publish(self) -> None:
        if self.phase != "race" or not self.shipped or not self.secret:
            return
        if self.private.cumulative_work[self.secret[-1].block_id] <= self._public_work():
            return
        self._check_secrecy()
        self.phase = "published"
        self.published = True
        for b in self.secret:
            self.world.submit_block(self.node_id, b)

    def _check_secrecy(self) -> None:
        for node in self.world.nodes.values():
            if node.honest and any(bid in node.tree(self.plan.coin) for bid in self.secret_ids):
                self.secrecy_violations += 1

    # -- observation -----------------------------------------------------

    def _on_block(self, node_id: str, coin: str, block: Block, result) -> None:
        if coin != self.plan.coin or self.done:
            return
        if node_id == self.node_id and block.block_id not in self.private:
            try:
                self.private.accept_block(block, self.world.now)
            except InvalidBlock:
                pass
            if self.phase == "premine":
                tip = self.node.tree(coin).tip
                if tip.block_id != self.base.block_id:
                    self.base = tip
            elif self.phase in ("race", "published"):
                self._maybe_give_up()
        if node_id == self.victim_node:
            if isinstance(result, ReorgReport):
                for victim, _ in result.double_spent:
                    if victim.tx_id == self.plan.victim_tx.tx_id and self.shipped:
                        self.success = True
                        self.reorg = result
                        self.finish()
                        return
            self._check_ship()

    def _maybe_give_up(self) -> None:
        g = self.plan.give_up_deficit
        if g is None:
            return
        public = self.node.tree(self.plan.coin).height
        mine = self.secret[-1].height if self.secret else self.base.height
        if public - mine >= g:
            self.finish("gave_up")

    def _check_ship(self) -> None:
        if self.shipped or self.broadcast_at is None:
            return
        tree = self.world.nodes[self.victim_node].tree(self.plan.coin)
        tx = self.plan.victim_tx
        if self.plan.z_wait == 0:
            ok = self.victim_node in tx.first_seen
        else:
            ok = confirmations(tree, tx.tx_id) >= self.plan.z_wait
        if ok:
            self.shipped = True
            self.ship_time = self.world.now
            self._maybe_publish()

    # -- accounting ------------------------------------------------------

    def outcome(self) -> AttackOutcome:
        w, plan = self.world, self.plan
        end = self.end_time if self.end_time is not None else w.now
        elapsed = end - self.start_time
        spent = self.rental_rate() * elapsed
        if self.aborted == "BudgetExhausted":
            spent = plan.budget
        spent = min(spent, plan.budget)
        price = w.coins[plan.coin].price.price(end)
        revenue = 0.0
        if self.success:
            tree = w.nodes[self.victim_node].tree(plan.coin)
            mined = math.fsum(b.txs[0].outputs[0].amount for b in tree.main_chain()
                              if b.miner == self.id and b.block_id in self.private)
            revenue = (plan.victim_amount + mined) * price
        acceptance = None if self.ship_time is None or self.broadcast_at is None else self.ship_time - self.broadcast_at
        flags = ("secrecy_violated",) if self.secrecy_violations else ()
        return AttackOutcome(self.success, self.secret_found, elapsed, spent, revenue, self.shipped,
                             self.ship_time, acceptance, False, self.aborted, self.published, flags)


def execute_double_spend(world: World, plan: DoubleSpendPlan, attacker_id: str = "attacker",
                         start: float | None = None) -> AttackOutcome:
    """Run the race to completion (success, deadline, budget or give-up)."""
    attack = DoubleSpendAttack(world, plan, attacker_id)
    attack.start(start)
    horizon = (start or world.now) + (plan.deadline if plan.deadline is not None else
                                      20 * max(plan.z_wait, 1) * world.coins[plan.coin].spec.block_time_target)
    world.run_until(horizon + 1e-9, stop=lambda: attack.done)
    attack.finish("deadline")
    return attack.outcome()


# --------------------------------------------------------------------------
# ready-made race world


def make_payment_pair(outpoint: OutPoint, value: float, owner: str, victim: str,
                      created_at: float = 0.0, replacement_fee: float = 0.0,
                      replacement_created_at: float | None = None) -> tuple[Transaction, Transaction]:
    """A payment to ``victim`` and a conflicting spend back to the owner."""
    pay = spend([(outpoint, value)], owner, [(victim, value)], created_at=created_at, tag="pay")
    back = spend([(outpoint, value)], owner, [(owner + ":change", value - replacement_fee)],
                 fee=replacement_fee,
                 created_at=created_at if replacement_created_at is None else replacement_created_at,
                 tag="replace")
    return pay, back


@dataclass
class RaceSetup:
    """Parameters of the standard double-spend race world."""

    coin: str = "BTC"
    q: float = 0.3
    z_wait: int = 6
    total_hash: float = 1.0
    honest_miners: int = 1
    latency: LatencyModel | None = None
    honest_nodes: int = 1
    deadline: float | None = None
    give_up_deficit: int | None = None
    premine: bool = True
    price: float = 1.0
    amount: float = 100.0
    budget: float = math.inf
    premium: float | None = None       # None: attacker owns its hash
    coin_overrides: dict = field(default_factory=dict)


def race_world(setup: RaceSetup, seed: int, defense: DefenseConfig | None = None):
    """World with honest miners, an attacker allocation and a matching plan."""
    from .economics import PriceModel, preset

    spec = preset(setup.coin, **setup.coin_overrides)
    w = World(seed, latency=setup.latency, defense=defense)
    honest_hash = (1.0 - setup.q) * setup.total_hash
    d = setup.total_hash * spec.block_time_target if setup.q < 1 else spec.block_time_target
    w.add_coin(spec, d, allocations=[("attacker", setup.amount)],
               price=PriceModel(spec.label, "fixed", {"price": setup.price}))
    for i in range(setup.honest_nodes):
        w.add_node(f"n{i}")
    if honest_hash > 0:
        per = honest_hash / setup.honest_miners
        for i in range(setup.honest_miners):
            w.add_miner(MinerActor(f"m{i}", per, spec.label, node=f"n{i % setup.honest_nodes}"))
    alloc = w.coins[spec.label].genesis.txs[0]
    pay, back = make_payment_pair(alloc.out(0), setup.amount, "attacker", "merchant")
    rental_price = 0.0
    if setup.premium is not None:
        block_value = reward_at(spec, 1) * setup.price
        rental_price = (1 + setup.premium) * block_value / d
    plan = DoubleSpendPlan(spec.label, pay, back, setup.z_wait, setup.q * setup.total_hash,
                           deadline=setup.deadline, budget=setup.budget, rental_price=rental_price,
                           premine=setup.premine, give_up_deficit=setup.give_up_deficit, victim_node="n0")
    return w, plan


@dataclass
class DoubleSpendScenario:
    """Seeded double-spend race; usable with :func:`chainlab.defenses.evaluate_defense`."""

    setup: RaceSetup
    name: str = "double_spend"

    def run(self, seed: int, defense: DefenseConfig | None = None) -> AttackOutcome:
        w, plan = race_world(self.setup, seed, defense)
        w.start()
        return execute_double_spend(w, plan)


def dogecoin_attack_setup() -> RaceSetup:
    """Small-coin attack: 120 USD blocks, 600 USD of rented hash.

    The attacker rents 1.5 times the honest hash (60% of the total) at a 10%
    premium over the competitive rate and the merchant waits two blocks.
    """
    return RaceSetup(coin="DOGE", q=0.6, z_wait=2, total_hash=1.0, price=120.0 / 500_000.0,
                     amount=2_500_000.0, budget=600.0, premium=0.1,
                     latency=LatencyModel("lognormal", 1.0, 2.0), honest_nodes=3, honest_miners=3)


# --------------------------------------------------------------------------
# zero-confirmation race (fee-bumped replacement)


@dataclass
class ZeroConfRace:
    """Merchant accepts at zero confirmations; ``gap`` seconds later the
    attacker broadcasts a higher-fee replacement that bribing miners prefer."""

    gap: float = 30.0
    bribe_fraction: float = 1.0
    n_nodes: int = 4
    coin: str = "BTC"
    latency: LatencyModel = field(default_factory=lambda: LatencyModel("fixed", 0.5, 0.5))
    name: str = "zero_conf_race"

    def run(self, seed: int, defense: DefenseConfig | None = None) -> AttackOutcome:
        from .economics import preset

        spec = preset(self.coin)
        w = World(seed, latency=self.latency, defense=defense)
        w.add_coin(spec, float(spec.block_time_target), allocations=[("attacker", 10.0)])
        for i in range(self.n_nodes):
            w.add_node(f"n{i}")
        n_bribed = round(self.bribe_fraction * self.n_nodes)
        for i in range(self.n_nodes):
            w.add_miner(MinerActor(f"m{i}", 1.0 / self.n_nodes, spec.label, node=f"n{i}",
                                   accept_bribes=i < n_bribed))
        alloc = w.coins[spec.label].genesis.txs[0]
        pay, back = make_payment_pair(alloc.out(0), 10.0, "attacker", "merchant",
                                      replacement_fee=0.5, replacement_created_at=self.gap)
        w.start()
        w.broadcast_tx(pay, "n0", spec.label)
        w.sim.schedule(self.gap, EventKind.ATTACK_PHASE, partial(w.broadcast_tx, back, f"n{self.n_nodes - 1}", spec.label))
        horizon = 20 * spec.block_time_target
        tree = w.nodes["n0"].tree(spec.label)

        def settled() -> bool:
            return any(confirmations(tree, t.tx_id) >= 1 for t in (pay, back)) and w.now > self.gap

        w.run_until(horizon, stop=settled)
        success = confirmations(tree, back.tx_id) >= 1
        return AttackOutcome(success, 0, w.now, 0.0, 10.0 if success else 0.0, True, 0.0, 0.0)


# --------------------------------------------------------------------------
# hash displacement


@dataclass
class Displacement:
    displaced_hash: float
    remaining_hash: float
    prior_hash: float
    moved: tuple[str, ...]

    def relative_power(self, attack_hash: float) -> float:
        """Attacker hash over what is left defending the coin."""
        return math.inf if self.remaining_hash <= 0 else attack_hash / self.remaining_hash


def displace_hash(market: HashMarket, premium: float, window: tuple[float, float], victim_coin: str,
                  lure_coin: str | None = None, world: World | None = None) -> Displacement:
    """Lure responsive miners off ``victim_coin`` for the duration of ``window``.

    A responsive miner takes any strictly positive premium.  Without a
    ``lure_coin`` the hash is rented out (leased to nobody in particular).
    With a ``world`` the moves are scheduled at the window edges; otherwise
    the market is changed immediately.
    """
    start, end = window
    if end < start:
        raise ValueError("window ends before it starts")
    on_coin = [(mid, m) for mid, m in sorted(market.participants.items())
               if m.coin_assignment == victim_coin and m.leased_to is None]
    prior = sum(m.hash_rate for _, m in on_coin)
    movers = [(mid, m) for mid, m in on_coin if m.responsive] if premium > 0 else []
    moved = tuple(mid for mid, _ in movers)
    displaced = sum(m.hash_rate for _, m in movers)

    def leave() -> None:
        for mid, m in movers:
            m.coin_assignment = lure_coin
            if world is not None:
                world.reschedule(mid)

    def back() -> None:
        for mid, m in movers:
            m.coin_assignment = victim_coin
            if world is not None:
                world.reschedule(mid)

    if world is None:
        leave()
    else:
        world.sim.schedule(start, EventKind.ATTACK_PHASE, leave)
        world.sim.schedule(end, EventKind.ATTACK_PHASE, back)
    return Displacement(displaced, prior - displaced, prior, moved)


# --------------------------------------------------------------------------
# hidden fork by a pool manager


@dataclass
class HiddenForkResult:
    outcome: AttackOutcome
    traces: dict[str, list[tuple]]
    detections: int
    disclosure_error: bool


def hidden_fork_world(seed: int, pool_share: float, z_wait: int, *, n_members: int = 4,
                      strategy: str = "hidden_fork", protocol: str = "h0_only",
                      defense: DefenseConfig | None = None, trace: bool = True,
                      deadline: float | None = None, give_up_deficit: int | None = None,
                      refresh_interval: float = 30.0):
    """World with an attacker-run pool of ``pool_share`` of the network."""
    from .economics import preset

    spec = preset("BTC")
    w = World(seed, defense=defense)
    w.add_coin(spec, spec.block_time_target, allocations=[("attacker", 100.0)])
    w.add_node("n0")
    w.add_miner(MinerActor("honest", 1.0 - pool_share, "BTC", node="n0"))
    members = []
    for i in range(n_members):
        mid = f"member{i}"
        w.add_miner(MinerActor(mid, pool_share / n_members, "BTC", node="n0"))
        members.append(mid)
    pool = PoolActor("pool", members, strategy, protocol, refresh_interval=refresh_interval)
    pool.trace = trace
    w.add_pool(pool)
    alloc = w.coins["BTC"].genesis.txs[0]
    pay, back = make_payment_pair(alloc.out(0), 100.0, "attacker", "merchant")
    plan = DoubleSpendPlan("BTC", pay, back, z_wait, 0.0, deadline=deadline,
                           give_up_deficit=give_up_deficit, victim_node="n0")
    return w, plan, pool


def hidden_fork_attack(world: World, pool: PoolActor, plan: DoubleSpendPlan,
                       horizon: float | None = None) -> HiddenForkResult:
    """Pool manager steers member hash onto a secret double-spend branch.

    Members only receive work items; under ``h0_only`` they see nothing that
    differs from honest work.  When the work protocol discloses the previous
    block the attack still runs but is flagged, and members that check their
    work may detect it and leave.
    """
    flags = []
    disclosure = world.defense.plaintext_aware or pool.work_protocol != "h0_only"
    if disclosure:
        flags.append("ProtocolDisclosureError")
    attack = None
    if pool.manager_strategy == "hidden_fork":
        attack = DoubleSpendAttack(world, plan, attacker_id=f"manager:{pool.id}", node_id=pool_node(world, pool))
        attack.extra_hash = list(pool.members)
        world.pool_templates[pool.id] = attack.pool_template
        attack.start(world.now)
    if not world._started:
        world.start()
    deadline = plan.deadline if plan.deadline is not None else 20 * max(plan.z_wait, 1) * world.coins[plan.coin].spec.block_time_target
    end = world.now + (horizon if horizon is not None else deadline)
    world.run_until(end + 1e-9, stop=(lambda: attack.done) if attack and horizon is None else None)
    if attack is not None:
        attack.finish("deadline")
        out = attack.outcome()
    else:
        out = AttackOutcome(False, 0, end, 0.0, 0.0)
    out.detected = bool(world.detections)
    out.flags = tuple(flags) + out.flags
    return HiddenForkResult(out, world.traces, len(world.detections), disclosure)


def pool_node(world: World, pool: PoolActor) -> str:
    """The node the pool manager mines from (the first member's node)."""
    return world.miners[pool.members[0]].node if pool.members else world.reference_node().id


@dataclass
class HiddenForkScenario:
    pool_share: float = 0.45
    z_wait: int = 2
    n_members: int = 4
    name: str = "hidden_fork"

    def run(self, seed: int, defense: DefenseConfig | None = None) -> AttackOutcome:
        defense = defense or DefenseConfig()
        w, plan, pool = hidden_fork_world(seed, self.pool_share, self.z_wait, n_members=self.n_members,
                                          defense=defense, trace=True)
        res = hidden_fork_attack(w, pool, plan)
        out = res.outcome
        out.detected = res.detections > 0
        return out


# --------------------------------------------------------------------------
# bribes and cartels


def bribe_inclusion(miners: Iterable[MinerActor], original: Transaction, conflict_tx: Transaction,
                    bribe: float, confirmations_so_far: int = 0) -> float:
    """Hash fraction that would mine ``conflict_tx`` instead of ``original``."""
    if confirmations_so_far > 0:
        raise AlreadyConfirmed(f"{original.tx_id[:10]} already has {confirmations_so_far} confirmations")
    miners = list(miners)
    total = sum(m.hash_rate for m in miners)
    if total <= 0:
        return 0.0
    differential = original.fee - conflict_tx.fee
    adopt = sum(m.hash_rate for m in miners if m.accept_bribes and bribe > differential)
    return adopt / total


def cartel_filter(cartel: Iterable[str]):
    """Block-acceptance policy: only blocks mined by cartel members are valid."""
    members = frozenset(cartel)

    def policy(block: Block, tree: BlockTree) -> None:
        if members and block.miner not in members:
            raise InvalidBlock(f"{block.miner} is not in the cartel")

    return policy


def cartel_world(seed: int, cartel_share: float, n_outsiders: int = 2, n_members: int = 2):
    """Cartel members reject outsiders' blocks; outsiders follow the usual rule."""
    from .economics import preset

    spec = preset("BTC")
    w = World(seed)
    w.add_coin(spec, spec.block_time_target)
    cartel = [f"c{i}" for i in range(n_members)]
    policy = cartel_filter(cartel)
    for i, cid in enumerate(cartel):
        node = w.add_node(f"cn{i}")
        node.validators.append(policy)
        w.add_miner(MinerActor(cid, cartel_share / n_members, "BTC", node=node.id))
    for i in range(n_outsiders):
        w.add_node(f"on{i}")
        w.add_miner(MinerActor(f"o{i}", (1 - cartel_share) / n_outsiders, "BTC", node=f"on{i}"))
    return w, cartel


def outsider_orphan_rate(world: World, cartel: Iterable[str], judge: str) -> float:
    """Fraction of non-cartel blocks missing from ``judge``'s main chain."""
    members = set(cartel)
    tree = world.nodes[judge].tree("BTC")
    outsiders = [b for b in world.coins["BTC"].created if b.miner not in members]
    if not outsiders:
        return 0.0
    return sum(1 for b in outsiders if not tree.on_main_chain(b.block_id)) / len(outsiders)


__all__ = [
    "BudgetExhausted", "AlreadyConfirmed", "catch_up_probability", "catch_up_probability_exact",
    "DoubleSpendPlan", "AttackOutcome", "DoubleSpendAttack", "execute_double_spend", "make_payment_pair",
    "RaceSetup", "race_world", "DoubleSpendScenario", "dogecoin_attack_setup", "ZeroConfRace",
    "Displacement", "displace_hash", "HiddenForkResult", "hidden_fork_world", "hidden_fork_attack",
    "HiddenForkScenario", "bribe_inclusion", "cartel_filter", "cartel_world", "outsider_orphan_rate",
    "attack_cost_estimate", "CoinMarket", "ProtocolDisclosureError",
]
