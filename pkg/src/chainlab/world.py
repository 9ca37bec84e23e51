"""The simulated world: coins, nodes, miners, pools, markets and their events.

Every node keeps its own :class:`~chainlab.chain.BlockTree` per coin and
learns about blocks and transactions only through broadcast arrivals.  A
miner is attached to one node and, when its Poisson clock fires, builds a
block on whatever template applies to it (its node's main tip, its pool's
template, or an attacker's secret tip).

Attack controllers and defenses plug in through ``block_listeners`` and the
per-node validators; see :mod:`chainlab.attacks` and
:mod:`chainlab.defenses`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Iterable

import numpy as np

from .chain import (Block, BlockTree, ChainError, InvalidBlock, ReorgReport, Transaction,
                    genesis_block, make_block)
from .economics import CoinMarket, CoinSpec, HashMarket, PriceModel, apply_reassignments, migrate, reward_at
from .mining import (BlockTemplate, Difficulty, MinerActor, PoolActor, ProtocolDisclosureError,
                     apply_aux_pow, detect_redirect, generate_shares, issue_work, mine_step)
from .network import LatencyModel, PeerGraph, broadcast
from .sim import EventKind, RngStreams, Simulator, sample_exponential


@dataclass
class DefenseConfig:
    timestamp: bool = False
    threshold: float = 20.0
    confirmers: bool = False
    confirmer_k: int = 3
    confirmer_delay: float = 1.0
    shares: bool = False
    share_min_zeros: int = 48
    share_rate: float = 0.2          # evidence-grade shares per second, network-wide
    rpca: bool = False
    plaintext_aware: bool = False
    min_weight: float = 1.0
    accept_any_on_tie: bool = False

    VARIANTS = ("baseline", "timestamped_20s", "confirmers", "shares", "rpca", "plaintext_aware", "all")

    @classmethod
    def variant(cls, name: str) -> "DefenseConfig":
        if name == "baseline":
            return cls()
        if name == "timestamped_20s":
            return cls(timestamp=True)
        if name == "confirmers":
            return cls(timestamp=True, confirmers=True)
        if name == "shares":
            return cls(timestamp=True, shares=True)
        if name == "rpca":
            return cls(rpca=True)
        if name == "plaintext_aware":
            return cls(plaintext_aware=True)
        if name == "all":
            return cls(timestamp=True, confirmers=True, shares=True, rpca=True, plaintext_aware=True)
        raise ValueError(f"unknown defense variant {name!r}")

    @property
    def adjudicates(self) -> bool:
        return self.timestamp or self.rpca


@dataclass
class CoinState:
    spec: CoinSpec
    difficulty: Difficulty
    genesis: Block
    price: PriceModel
    mean_fees: float = 0.0
    created: list[Block] = field(default_factory=list)
    last_retarget: int = 0
    max_height: int = 0


class Node:
    def __init__(self, node_id: str, honest: bool = True) -> None:
        self.id = node_id
        self.honest = honest
        self.trees: dict[str, BlockTree] = {}
        self.mempool: dict[str, dict[str, Transaction]] = {}
        self.validators: list[Callable[[Block, BlockTree], None]] = []
        self.rejected: int = 0

    def tree(self, coin: str) -> BlockTree:
        return self.trees[coin]


BlockListener = Callable[[str, str, Block, object], None]


class World:
    """Container wiring every subsystem to one :class:`Simulator`."""

    def __init__(self, master_seed: int = 0, latency: LatencyModel | None = None,
                 defense: DefenseConfig | None = None, check_txs: bool = True) -> None:
        self.sim = Simulator()
        self.rng = RngStreams(master_seed)
        self.latency = latency or LatencyModel("fixed", 0.0, 0.0)
        self.defense = defense or DefenseConfig()
        self.check_txs = check_txs
        self.graph = PeerGraph([])
        self.coins: dict[str, CoinState] = {}
        self.nodes: dict[str, Node] = {}
        self.miners: dict[str, MinerActor] = {}
        self.pools: dict[str, PoolActor] = {}
        self.markets: list[HashMarket] = []
        self.block_listeners: list[BlockListener] = []
        self.tx_listeners: list[Callable[[str, Transaction, float], None]] = []
        self.templates: dict[str, Callable] = {}
        self.reorgs: list[tuple[float, str, str, ReorgReport]] = []
        self.evidence: dict[str, list] = {}
        self.seen_by_outpoint: dict = {}
        self.block_finders: dict[str, str] = {}
        self.traces: dict[str, list[tuple]] = {}
        self.detections: list[tuple[float, str, str]] = []
        self.pool_redirect: dict[str, str] = {}
        self.pool_templates: dict[str, Callable] = {}
        self.metrics: dict[str, list[tuple]] = {}
        self.metrics_interval: float | None = None
        self._mining: dict[str, object] = {}
        self._aux: dict[str, object] = {}
        self._started = False
        self._nonce = 0

    # -- construction ----------------------------------------------------

    def add_coin(self, spec: CoinSpec, difficulty: Difficulty | float | None = None,
                 allocations: Iterable[tuple[str, float]] = (), price: PriceModel | None = None,
                 mean_fees: float = 0.0) -> CoinState:
        if isinstance(difficulty, (int, float)):
            difficulty = Difficulty(spec.label, float(difficulty), spec.retarget_interval,
                                    spec.block_time_target)
        gen = genesis_block(spec, allocations)
        state = CoinState(spec, difficulty, gen, price or PriceModel(spec.label), mean_fees)
        self.coins[spec.label] = state
        for node in self.nodes.values():
            self._attach_tree(node, state)
        return state

    def _attach_tree(self, node: Node, state: CoinState) -> None:
        validators = [partial(self._run_node_validators, node)]
        node.trees[state.spec.label] = BlockTree(state.spec, state.genesis, validators=validators,
                                                 check_txs=self.check_txs)
        node.mempool[state.spec.label] = {}

    def add_node(self, node_id: str, honest: bool = True, in_graph: bool = True) -> Node:
        node = Node(node_id, honest)
        self.nodes[node_id] = node
        if in_graph:
            for other in self.graph.nodes:
                self.graph.edges[frozenset((node_id, other))] = 0.0
            self.graph.nodes.append(node_id)
        for state in self.coins.values():
            self._attach_tree(node, state)
        return node

    def add_miner(self, miner: MinerActor) -> MinerActor:
        if miner.node not in self.nodes:
            raise KeyError(f"miner {miner.id} attached to unknown node {miner.node}")
        self.miners[miner.id] = miner
        if self._started:
            self.reschedule(miner.id)
        return miner

    def add_pool(self, pool: PoolActor) -> PoolActor:
        self.pools[pool.id] = pool
        for mid in pool.members:
            self.miners[mid].pool = pool.id
        return pool

    def add_market(self, market: HashMarket) -> HashMarket:
        self.markets.append(market)
        return market

    # -- lifecycle -------------------------------------------------------

    def start(self, metrics_interval: float | None = None) -> None:
        for label, state in self.coins.items():
            if state.difficulty is None:
                h = self.effective_hash_rate(label)
                state.difficulty = Difficulty.for_hash_rate(state.spec, h if h > 0 else 1.0)
        self._started = True
        if self.defense.confirmers or self.defense.shares:
            from .defenses import install_evidence_sources
            install_evidence_sources(self)
        for mid in sorted(self.miners):
            self.reschedule(mid)
        for market in self.markets:
            self.sim.schedule(self.sim.now + market.tick_interval, EventKind.MARKET_TICK,
                              partial(self._market_tick, market))
        for pool in self.pools.values():
            if self._pool_traced(pool):
                self.sim.schedule(self.sim.now, EventKind.MSG_ARRIVAL, partial(self._refresh_work, pool.id))
        if metrics_interval:
            self.metrics_interval = metrics_interval
            self.metrics = {c: [] for c in self.coins}
            self.sim.schedule(self.sim.now, EventKind.MARKET_TICK, self._sample_metrics)

    def run_until(self, t_end: float, stop: Callable[[], bool] | None = None) -> int:
        if not self._started:
            self.start()
        return self.sim.run_until(t_end, stop)

    @property
    def now(self) -> float:
        return self.sim.now

    # -- mining ----------------------------------------------------------

    def effective_coin(self, miner: MinerActor) -> str | None:
        if miner.leased_to is not None:
            return miner.coin_assignment
        if miner.pool is not None and miner.pool in self.pool_redirect:
            return self.pool_redirect[miner.pool]
        return miner.coin_assignment

    def reschedule(self, miner_id: str) -> None:
        """Redraw a miner's block clock (after any change of rate or coin)."""
        miner = self.miners[miner_id]
        old = self._mining.pop(miner_id, None)
        if old is not None:
            old.cancel()
        old = self._aux.pop(miner_id, None)
        if old is not None:
            old.cancel()
        coin = self.effective_coin(miner)
        if coin is None or coin not in self.coins:
            return
        stream = self.rng(f"mining:{miner_id}")
        t = mine_step(miner, self.coins[coin].difficulty, stream, self.sim.now)
        self._mining[miner_id] = self.sim.schedule(t, EventKind.BLOCK_FOUND,
                                                   partial(self._found, miner_id, coin))
        for child in self.coins.values():
            if child.spec.merged_mining_parent == coin:
                t = mine_step(miner, child.difficulty, self.rng(f"aux:{miner_id}:{child.spec.label}"),
                              self.sim.now)
                self._aux[miner_id] = self.sim.schedule(
                    t, EventKind.BLOCK_FOUND, partial(self._found_aux, miner_id, coin, child.spec.label))

    def reschedule_coin(self, coin: str) -> None:
        for mid in sorted(self.miners):
            m = self.miners[mid]
            eff = self.effective_coin(m)
            if eff == coin or (eff is not None and self.coins[coin].spec.merged_mining_parent == eff):
                self.reschedule(mid)

    def coin_hash_rate(self, coin: str) -> float:
        return sum(m.hash_rate for m in self.miners.values() if self.effective_coin(m) == coin)

    def effective_hash_rate(self, coin: str) -> float:
        """Own hash plus parent-coin hash contributed through merged mining."""
        h = self.coin_hash_rate(coin)
        parent = self.coins[coin].spec.merged_mining_parent
        if parent is not None and parent in self.coins:
            h += self.coin_hash_rate(parent)
        return h

    def _template(self, miner: MinerActor, coin: str):
        """Parent block, submission callback, payee and forced txs (or None) for the next block."""
        if miner.leased_to is not None and miner.leased_to in self.templates:
            got = self.templates[miner.leased_to](miner, coin)
            if got is not None:
                return got[0], got[1], miner.leased_to, got[2]
        if miner.pool is not None:
            pool = self.pools[miner.pool]
            if pool.id in self.pool_templates:
                got = self.pool_templates[pool.id](miner, coin)
                if got is not None:
                    return got[0], got[1], pool.id, got[2]
            payee = f"manager:{pool.id}" if pool.id in self.pool_redirect else pool.id
            node = self.nodes[miner.node]
            return node.tree(coin).tip, partial(self.submit_block, miner.node), payee, None
        node = self.nodes[miner.node]
        return node.tree(coin).tip, partial(self.submit_block, miner.node), miner.id, None

    def _found(self, miner_id: str, coin: str) -> None:
        miner = self.miners[miner_id]
        del self._mining[miner_id]
        parent, submit, payee, txs = self._template(miner, coin)
        if txs is None:
            txs = self.select_txs(self.nodes[miner.node], coin, parent, miner)
        block = self._make(coin, parent, payee, txs)
        self.block_finders[block.block_id] = miner_id
        submit(block)
        if miner_id not in self._mining:
            self.reschedule(miner_id)

    def _found_aux(self, miner_id: str, parent_coin: str, child_coin: str) -> None:
        miner = self.miners[miner_id]
        self._aux.pop(miner_id, None)
        node = self.nodes[miner.node]
        child = self.coins[child_coin]
        proof = self._make(parent_coin, node.tree(parent_coin).tip, miner.id, (), child.difficulty.expected_hashes_per_block)
        block = apply_aux_pow(proof, child.spec, node.tree(child_coin).tip, child.difficulty)
        if block is not None:
            self._record_created(block)
            self.submit_block(miner.node, block)
        t = mine_step(miner, child.difficulty, self.rng(f"aux:{miner_id}:{child_coin}"), self.sim.now)
        self._aux[miner_id] = self.sim.schedule(t, EventKind.BLOCK_FOUND,
                                                partial(self._found_aux, miner_id, parent_coin, child_coin))

    def _make(self, coin: str, parent: Block, payee: str, txs, difficulty: float | None = None) -> Block:
        state = self.coins[coin]
        self._nonce += 1
        d = state.difficulty.expected_hashes_per_block if difficulty is None else difficulty
        block = make_block(state.spec, parent, payee, self.sim.now, d, txs, nonce=self._nonce)
        if difficulty is None:
            self._record_created(block)
        return block

    def _record_created(self, block: Block) -> None:
        state = self.coins[block.coin]
        state.created.append(block)
        if block.height > state.max_height:
            state.max_height = block.height

    def submit_block(self, node_id: str, block: Block) -> None:
        """Accept locally, broadcast to every other node and maybe retarget."""
        self.deliver_block(node_id, block)
        self.broadcast_block(node_id, block)
        self._maybe_retarget(node_id, block)

    def broadcast_block(self, node_id: str, block: Block) -> None:
        stream = self.rng(f"net:{node_id}")
        for dest, t in broadcast(self.graph, self.latency, node_id, self.sim.now, stream)[1:]:
            self.sim.schedule(t, EventKind.MSG_ARRIVAL, partial(self.deliver_block, dest, block))

    def deliver_block(self, node_id: str, block: Block):
        node = self.nodes[node_id]
        tree = node.tree(block.coin)
        for tx in block.txs:
            if not tx.is_coinbase:
                self._observe_tx(node, tx)
        try:
            result = tree.accept_block(block, self.sim.now)
        except ChainError:
            node.rejected += 1
            result = None
        if isinstance(result, ReorgReport) and result.is_reorg:
            self.reorgs.append((self.sim.now, node_id, block.coin, result))
        for fn in list(self.block_listeners):
            fn(node_id, block.coin, block, result)
        return result

    def _maybe_retarget(self, node_id: str, block: Block) -> None:
        state = self.coins[block.coin]
        n = state.spec.retarget_interval
        if block.height % n or block.height <= state.last_retarget or block.height <= n:
            return
        tree = self.nodes[node_id].tree(block.coin)
        if block.block_id not in tree:
            return
        path = []
        for b in tree.path_to_root(block.block_id):
            path.append(b)
            if len(path) == n + 1:
                break
        window, before = path[:n][::-1], path[n]
        from .mining import retarget
        state.difficulty = retarget(state.difficulty, window, window_start=before.timestamp)
        state.last_retarget = block.height
        self.sim.schedule(self.sim.now, EventKind.DIFFICULTY_RETARGET,
                          partial(self.reschedule_coin, block.coin))

    # -- transactions ----------------------------------------------------

    def broadcast_tx(self, tx: Transaction, origin: str, coin: str) -> None:
        self.deliver_tx(origin, tx, coin)
        stream = self.rng(f"net:{origin}")
        for dest, t in broadcast(self.graph, self.latency, origin, self.sim.now, stream)[1:]:
            self.sim.schedule(t, EventKind.MSG_ARRIVAL, partial(self.deliver_tx, dest, tx, coin))

    def deliver_tx(self, node_id: str, tx: Transaction, coin: str) -> None:
        node = self.nodes[node_id]
        if self._observe_tx(node, tx):
            node.mempool[coin].setdefault(tx.tx_id, tx)
            for fn in list(self.tx_listeners):
                fn(node_id, tx, self.sim.now)

    def _observe_tx(self, node: Node, tx: Transaction) -> bool:
        first = tx.see(node.id, self.sim.now)
        if first and node.honest:
            for op in tx.outpoints():
                known = self.seen_by_outpoint.setdefault(op, {})
                known.setdefault(tx.tx_id, tx)
        return first

    def honest_first_seen(self, tx: Transaction) -> float | None:
        times = [t for n, t in tx.first_seen.items() if n in self.nodes and self.nodes[n].honest]
        return min(times) if times else None

    def known_conflicts(self, tx: Transaction) -> list[Transaction]:
        out: dict[str, Transaction] = {}
        for op in tx.outpoints():
            for tid, other in self.seen_by_outpoint.get(op, {}).items():
                if tid != tx.tx_id:
                    out[tid] = other
        return list(out.values())

    def select_txs(self, node: Node, coin: str, parent: Block, miner: MinerActor) -> list[Transaction]:
        pool = node.mempool.get(coin)
        if not pool:
            return []
        tree = node.tree(coin)
        if parent.block_id not in tree:
            return []
        chosen: list[Transaction] = []
        used = set()
        candidates = list(pool.values())
        if miner.accept_bribes:
            # highest fee first among conflicts; arrival order otherwise
            candidates.sort(key=lambda t: -t.fee)
        for tx in candidates:
            ops = tx.outpoints()
            if any(op in used for op in ops):
                continue
            if not tree_tx_valid(tree, tx, parent.block_id):
                continue
            if self.defense.adjudicates and not self.tx_admissible(tx):
                continue
            chosen.append(tx)
            used.update(ops)
        return chosen

    # -- defenses hooks ----------------------------------------------------

    def tx_admissible(self, tx: Transaction) -> bool:
        """Whether honest nodes consider ``tx`` minable given known conflicts."""
        from .defenses import tx_admissible
        return tx_admissible(self, tx)

    def _run_node_validators(self, node: Node, block: Block, tree: BlockTree) -> None:
        for v in node.validators:
            v(block, tree)
        if node.honest and self.defense.adjudicates:
            for tx in block.txs:
                if not tx.is_coinbase and not self.tx_admissible(tx):
                    raise InvalidBlock(f"{tx.tx_id[:10]} loses adjudication")

    # -- pools -----------------------------------------------------------

    def _pool_traced(self, pool: PoolActor) -> bool:
        return getattr(pool, "trace", False)

    def _refresh_work(self, pool_id: str) -> None:
        pool = self.pools[pool_id]
        job = getattr(pool, "_job", 0) + 1
        pool._job = job
        for mid in list(pool.members):
            miner = self.miners[mid]
            if miner.pool != pool_id:
                continue
            coin = self.effective_coin(miner)
            if coin is None:
                continue
            parent, _, payee, _ = self._template(miner, coin)
            template = BlockTemplate(coin, parent.block_id, payout=payee)
            try:
                work = issue_work(pool, template, job_id=job, plaintext_aware=self.defense.plaintext_aware)
            except ProtocolDisclosureError:
                pool.work_protocol = "stratum_like"
                work = issue_work(pool, template, job_id=job, plaintext_aware=True)
            trace = self.traces.setdefault(mid, [])
            trace.append(("work", self.sim.now, work.observable()))
            window = (self.sim.now, self.sim.now + pool.refresh_interval)
            diff = self.coins[coin].difficulty
            shares = generate_shares(miner, window, diff, min(pool.share_zeros, int(diff.target_zeros)),
                                     self.rng(f"shares:{mid}"), job)
            trace.extend(("share", s.found_at, s.zeros) for s in shares)
            if miner.protocol_awareness == "full_header" and work.prev_id_disclosed is not None:
                tree = self.nodes[miner.node].tree(work.coin_disclosed)
                recent = [b.block_id for _, b in zip(range(3), tree.path_to_root(tree.main_tip))]
                if work.coin_disclosed != miner.coin_assignment or detect_redirect(
                        work, tree.main_tip, recent) == "redirected":
                    self.detections.append((self.sim.now, mid, pool_id))
                    if getattr(pool, "leave_on_detect", True):
                        pool.members.remove(mid)
                        miner.pool = None
                        self.reschedule(mid)
        self.sim.schedule(self.sim.now + pool.refresh_interval, EventKind.MSG_ARRIVAL,
                          partial(self._refresh_work, pool_id))

    # -- market ----------------------------------------------------------

    def coin_market(self, coin: str) -> CoinMarket:
        state = self.coins[coin]
        return CoinMarket(state.spec, self.coin_hash_rate(coin), state.max_height + 1,
                          state.price.price(self.sim.now), None, state.mean_fees)

    def _market_tick(self, market: HashMarket) -> None:
        coins = [self.coin_market(c) for c in self.coins if self.coins[c].spec.hash_family == market.family]
        deltas = migrate(market, coins, self.rng(f"market:{market.family}"))
        apply_reassignments(market, deltas)
        for d in deltas:
            self.reschedule(d.miner_id)
        self.sim.schedule(self.sim.now + market.tick_interval, EventKind.MARKET_TICK,
                          partial(self._market_tick, market))

    # -- metrics ---------------------------------------------------------

    def reference_node(self) -> Node:
        for node in self.nodes.values():
            if node.honest:
                return node
        return next(iter(self.nodes.values()))

    def _sample_metrics(self) -> None:
        ref = self.reference_node()
        t = self.sim.now
        window = self.metrics_interval
        for label, state in self.coins.items():
            tree = ref.tree(label)
            recent = [b for b in state.created[-2000:] if t - window < b.timestamp <= t]
            off = sum(1 for b in recent if not tree.on_main_chain(b.block_id))
            fork_rate = off / len(recent) if recent else 0.0
            cm = self.coin_market(label)
            miners = [m for m in self.miners.values() if self.effective_coin(m) == label]
            if miners and cm.hash_rate > 0:
                prof = sum(cm.value_rate * m.hash_rate / cm.hash_rate - m.electricity_cost
                           for m in miners) / len(miners)
            else:
                prof = 0.0
            self.metrics[label].append((t, self.effective_hash_rate(label), state.difficulty.expected_hashes_per_block,
                                        tree.height, fork_rate, cm.price, prof))
        self.sim.schedule(t + window, EventKind.MARKET_TICK, self._sample_metrics)


def tree_tx_valid(tree: BlockTree, tx: Transaction, tip_id: str) -> bool:
    """Could ``tx`` go into a block on top of ``tip_id`` in ``tree``?"""
    if tx.is_coinbase:
        return False
    creators = tree.tx_index.get(tx.tx_id)
    if creators and any(tree.is_ancestor(b, tip_id) for b in creators):
        return False
    for op in tx.outpoints():
        src_blocks = tree.tx_index.get(op.tx_id, ())
        if not any(tree.is_ancestor(b, tip_id) for b in src_blocks):
            return False
        if tree.spent_on_chain(op, tip_id):
            return False
    return True
