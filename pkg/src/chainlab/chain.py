"""Blocks, transactions and the per-coin block tree.

The tree keeps every block it has connected, tracks cumulative expected work
per block, and selects the main tip by the longest-chain rule (greatest
cumulative work, first received wins ties).  Blocks whose parent is unknown
wait in a bounded staging buffer and are connected once the parent shows up.
"""

from __future__ import annotations

import hashlib
import json
import math
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import IO, Callable, Iterable, Iterator

from .economics import CoinSpec, reward_at
from .signatures import GROUP_ORDER, Signature, verify

NULL_ID = "0" * 64


class ChainError(ValueError):
    pass


class InvalidReward(ChainError):
    pass


class IntraChainDoubleSpend(ChainError):
    pass


class UnknownInput(ChainError):
    pass


class InvalidBlock(ChainError):
    """Rejected by a node's acceptance policy (cartel, timestamp rule, ...)."""


class UnknownParent(ChainError):
    pass


def sha256_hex(data: str | bytes) -> str:
    if isinstance(data, str):
        data = data.encode()
    return hashlib.sha256(data).hexdigest()


# --------------------------------------------------------------------------
# transactions


@dataclass(frozen=True)
class OutPoint:
    tx_id: str
    index: int


@dataclass(frozen=True)
class TxInput:
    source: OutPoint
    value: float
    signature: Signature


@dataclass(frozen=True)
class TxOutput:
    recipient: str
    amount: float


class Transaction:
    """A spend of earlier outputs, or a coinbase/allocation when ``inputs`` is empty.

    ``tx_id`` hashes the content with every signature normalised, so a
    malleated copy has the same id.  ``raw_id`` hashes the signatures as
    given, which is what a node without normalisation would key on.
    ``first_seen`` records per-node observation times and is not part of the
    identity.
    """

    __slots__ = ("inputs", "outputs", "fee", "created_at", "first_seen", "tag", "tx_id", "raw_id")

    def __init__(self, inputs: Iterable[TxInput], outputs: Iterable[TxOutput], fee: float = 0.0,
                 created_at: float = 0.0, tag: str = "") -> None:
        self.inputs = tuple(inputs)
        self.outputs = tuple(outputs)
        self.fee = float(fee)
        self.created_at = float(created_at)
        self.tag = tag
        self.first_seen: dict[str, float] = {}
        if self.fee < 0:
            raise ChainError("negative fee")
        if self.inputs:
            total_in = math.fsum(i.value for i in self.inputs)
            total_out = math.fsum(o.amount for o in self.outputs) + self.fee
            if not math.isclose(total_in, total_out, rel_tol=1e-12, abs_tol=1e-12):
                raise ChainError(f"inputs {total_in} != outputs + fee {total_out}")
        self.tx_id = self._digest(normal=True)
        self.raw_id = self._digest(normal=False)

    def _digest(self, normal: bool) -> str:
        parts = []
        for i in self.inputs:
            sig = i.signature
            s = min(sig.s, GROUP_ORDER - sig.s) if normal else sig.s
            parts.append(f"{i.source.tx_id}:{i.source.index}:{i.value!r}:{sig.key_id}:{sig.r:x}:{s:x}")
        for o in self.outputs:
            parts.append(f"{o.recipient}:{o.amount!r}")
        parts.append(f"{self.fee!r}|{self.created_at!r}|{self.tag}")
        return sha256_hex("/".join(parts))

    @property
    def is_coinbase(self) -> bool:
        return not self.inputs

    def outpoints(self) -> tuple[OutPoint, ...]:
        return tuple(i.source for i in self.inputs)

    def out(self, index: int) -> OutPoint:
        return OutPoint(self.tx_id, index)

    def see(self, node_id: str, t: float) -> bool:
        """Record an observation; returns False if the node had already seen it."""
        if node_id in self.first_seen:
            return False
        self.first_seen[node_id] = t
        return True

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Transaction) and other.tx_id == self.tx_id

    def __hash__(self) -> int:
        return hash(self.tx_id)

    def __repr__(self) -> str:
        return f"Transaction({self.tx_id[:10]}, {len(self.inputs)} in, {len(self.outputs)} out)"


def coinbase(miner: str, amount: float, height: int, coin: str) -> Transaction:
    return Transaction((), (TxOutput(miner, amount),), tag=f"coinbase:{coin}:{height}")


def spend(outpoints: Iterable[tuple[OutPoint, float]], key_id: str,
          outputs: Iterable[tuple[str, float]], fee: float = 0.0, created_at: float = 0.0,
          tag: str = "") -> Transaction:
    """Build a transaction spending ``outpoints`` owned by ``key_id``."""
    from .signatures import sign

    outputs = tuple(TxOutput(r, float(a)) for r, a in outputs)
    ins = []
    for op, value in outpoints:
        msg = f"{op.tx_id}:{op.index}:{outputs}:{tag}"
        ins.append(TxInput(op, float(value), sign(key_id, msg)))
    return Transaction(ins, outputs, fee, created_at, tag)


# --------------------------------------------------------------------------
# blocks


def merkle_root(tx_ids: Iterable[str]) -> str:
    level = [bytes.fromhex(t) for t in tx_ids]
    if not level:
        return NULL_ID
    while len(level) > 1:
        if len(level) % 2:
            level.append(level[-1])
        level = [hashlib.sha256(hashlib.sha256(a + b).digest()).digest()
                 for a, b in zip(level[::2], level[1::2])]
    return level[0].hex()


@dataclass(frozen=True, eq=False)
class Block:
    block_id: str
    prev_id: str
    coin: str
    height: int
    miner: str
    timestamp: float
    txs: tuple[Transaction, ...]
    reward: float
    difficulty: float
    work: float
    version: int = 1
    aux_parent: str | None = None

    @property
    def tx_count(self) -> int:
        return len(self.txs)

    def __hash__(self) -> int:
        return hash(self.block_id)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Block) and other.block_id == self.block_id

    def __repr__(self) -> str:
        return f"Block({self.coin}#{self.height} {self.block_id[:10]} by {self.miner})"


def make_block(coin: CoinSpec, parent: Block | None, miner: str, timestamp: float,
               difficulty: float, txs: Iterable[Transaction] = (), *, version: int = 1,
               nonce: int = 0, aux_parent: str | None = None) -> Block:
    """Assemble a block with a coinbase paying ``reward_at`` plus fees."""
    height = 0 if parent is None else parent.height + 1
    prev_id = NULL_ID if parent is None else parent.block_id
    txs = tuple(txs)
    reward = reward_at(coin, height)
    fees = math.fsum(t.fee for t in txs)
    if parent is not None:
        txs = (coinbase(miner, reward + fees, height, coin.label),) + txs
    work = difficulty + (0.0 if parent is None else parent.work)
    root = merkle_root(t.tx_id for t in txs)
    header = f"{version}|{coin.label}|{prev_id}|{root}|{timestamp!r}|{difficulty!r}|{miner}|{nonce}"
    return Block(sha256_hex(header), prev_id, coin.label, height, miner, float(timestamp), txs,
                 reward, float(difficulty), work, version, aux_parent)


def genesis_block(coin: CoinSpec, allocations: Iterable[tuple[str, float]] = (),
                  difficulty: float = 1.0) -> Block:
    """Height-0 block; ``allocations`` become spendable outputs, not minted coins."""
    txs = tuple(Transaction((), (TxOutput(k, float(a)),), tag=f"alloc:{coin.label}:{i}")
                for i, (k, a) in enumerate(allocations))
    return make_block(coin, None, "genesis", 0.0, difficulty, txs)


# --------------------------------------------------------------------------
# tree


@dataclass
class ReorgReport:
    old_tip: str
    new_tip: str
    detached: list[Block] = field(default_factory=list)
    attached: list[Block] = field(default_factory=list)
    reversed_txs: list[Transaction] = field(default_factory=list)
    double_spent: list[tuple[Transaction, Transaction]] = field(default_factory=list)

    @property
    def is_reorg(self) -> bool:
        return bool(self.detached)


class _Sentinel:
    def __init__(self, name: str) -> None:
        self.name = name

    def __repr__(self) -> str:
        return self.name

    def __bool__(self) -> bool:
        return False


NO_CHANGE = _Sentinel("NO_CHANGE")
STAGED = _Sentinel("STAGED")

Validator = Callable[[Block, "BlockTree"], None]


class BlockTree:
    """All blocks of one coin known to one node.

    ``validators`` are extra acceptance policies; each may raise
    :class:`InvalidBlock`.
    """

    def __init__(self, coin: CoinSpec, genesis: Block, *, staging_limit: int = 1000,
                 validators: Iterable[Validator] = (), check_txs: bool = True) -> None:
        if genesis.height != 0:
            raise ChainError("genesis must have height 0")
        self.coin = coin
        self.genesis = genesis
        self.blocks: dict[str, Block] = {genesis.block_id: genesis}
        self.children: dict[str, list[str]] = {genesis.block_id: []}
        self.cumulative_work: dict[str, float] = {genesis.block_id: genesis.difficulty}
        self.received: dict[str, tuple[float, int]] = {genesis.block_id: (0.0, 0)}
        self.tips: dict[str, None] = {genesis.block_id: None}
        self.main_tip = genesis.block_id
        self.main: list[str] = [genesis.block_id]
        self.staging: OrderedDict[str, Block] = OrderedDict()
        self.staging_limit = staging_limit
        self.validators = list(validators)
        self.check_txs = check_txs
        self.tx_index: dict[str, list[str]] = {}
        self.spend_index: dict[OutPoint, list[str]] = {}
        self._counter = 1
        self._index_txs(genesis)

    # -- queries ---------------------------------------------------------

    def __contains__(self, block_id: str) -> bool:
        return block_id in self.blocks

    def __len__(self) -> int:
        return len(self.blocks)

    @property
    def tip(self) -> Block:
        return self.blocks[self.main_tip]

    @property
    def height(self) -> int:
        return len(self.main) - 1

    def on_main_chain(self, block_id: str) -> bool:
        b = self.blocks.get(block_id)
        return b is not None and b.height < len(self.main) and self.main[b.height] == block_id

    def is_ancestor(self, anc_id: str, block_id: str) -> bool:
        """True if ``anc_id`` is ``block_id`` or one of its ancestors."""
        anc = self.blocks[anc_id]
        b = self.blocks[block_id]
        if self.on_main_chain(anc_id) and self.on_main_chain(block_id):
            return anc.height <= b.height
        while b.height > anc.height:
            b = self.blocks[b.prev_id]
        return b.block_id == anc_id

    def path_to_root(self, block_id: str) -> Iterator[Block]:
        b = self.blocks[block_id]
        while True:
            yield b
            if b.height == 0:
                return
            b = self.blocks[b.prev_id]

    def fork_point(self, a: str, b: str) -> str:
        x, y = self.blocks[a], self.blocks[b]
        while x.height > y.height:
            x = self.blocks[x.prev_id]
        while y.height > x.height:
            y = self.blocks[y.prev_id]
        while x.block_id != y.block_id:
            x, y = self.blocks[x.prev_id], self.blocks[y.prev_id]
        return x.block_id

    def main_chain(self) -> list[Block]:
        return [self.blocks[i] for i in self.main]

    def containing_main_block(self, tx_id: str) -> Block | None:
        for bid in self.tx_index.get(tx_id, ()):
            if self.on_main_chain(bid):
                return self.blocks[bid]
        return None

    def spent_on_chain(self, outpoint: OutPoint, tip_id: str | None = None) -> bool:
        tip_id = tip_id or self.main_tip
        return any(self.is_ancestor(bid, tip_id) for bid in self.spend_index.get(outpoint, ()))

    # -- mutation --------------------------------------------------------

    def accept_block(self, block: Block, node_local_time: float = 0.0):
        """Connect ``block`` (and any staged descendants).

        Returns a :class:`ReorgReport` when the main tip moved, ``NO_CHANGE``
        when it did not, and ``STAGED`` when the parent is still unknown.
        Raises :class:`InvalidReward`, :class:`IntraChainDoubleSpend`,
        :class:`UnknownInput` or :class:`InvalidBlock` for invalid blocks.
        """
        if block.block_id in self.blocks:
            return NO_CHANGE
        if block.prev_id not in self.blocks:
            self._stage(block)
            return STAGED
        old_tip = self.main_tip
        self._connect(block, node_local_time)
        pending = [block.block_id]
        while pending:
            pid = pending.pop()
            for child in [b for b in self.staging.values() if b.prev_id == pid]:
                del self.staging[child.block_id]
                try:
                    self._connect(child, node_local_time)
                except ChainError:
                    continue
                pending.append(child.block_id)
        if self.main_tip == old_tip:
            return NO_CHANGE
        return self._report(old_tip, self.main_tip)

    def _stage(self, block: Block) -> None:
        self.staging[block.block_id] = block
        while len(self.staging) > self.staging_limit:
            self.staging.popitem(last=False)

    def _validate(self, block: Block) -> None:
        parent = self.blocks[block.prev_id]
        if block.height != parent.height + 1:
            raise ChainError(f"height {block.height} does not follow parent {parent.height}")
        expected = reward_at(self.coin, block.height)
        if not math.isclose(block.reward, expected, rel_tol=1e-12, abs_tol=1e-15):
            raise InvalidReward(f"reward {block.reward} != {expected} at height {block.height}")
        for v in self.validators:
            v(block, self)
        if self.check_txs:
            self._check_spends(block)

    def _check_spends(self, block: Block) -> None:
        parent_id = block.prev_id
        in_block: dict[str, Transaction] = {}
        spent_here: set[OutPoint] = set()
        for n, tx in enumerate(block.txs):
            if tx.is_coinbase:
                if n != 0 and not tx.tag.startswith("alloc"):
                    raise ChainError("coinbase must come first")
                in_block[tx.tx_id] = tx
                continue
            if tx.tx_id in self.tx_index and any(
                    self.is_ancestor(b, parent_id) for b in self.tx_index[tx.tx_id]):
                raise IntraChainDoubleSpend(f"{tx.tx_id[:10]} already confirmed on this chain")
            for inp in tx.inputs:
                op = inp.source
                if op in spent_here:
                    raise IntraChainDoubleSpend(f"{op} spent twice in block")
                src = in_block.get(op.tx_id)
                if src is None:
                    creators = self.tx_index.get(op.tx_id, ())
                    cb = next((b for b in creators if self.is_ancestor(b, parent_id)), None)
                    if cb is None:
                        raise UnknownInput(f"input {op} not on this chain")
                    src = next(t for t in self.blocks[cb].txs if t.tx_id == op.tx_id)
                if op.index >= len(src.outputs):
                    raise UnknownInput(f"input {op} out of range")
                out = src.outputs[op.index]
                if not math.isclose(out.amount, inp.value, rel_tol=1e-12, abs_tol=1e-15):
                    raise UnknownInput(f"input {op} value mismatch")
                if not verify(inp.signature, out.recipient):
                    raise UnknownInput(f"input {op} signature does not match owner")
                if self.spent_on_chain(op, parent_id):
                    raise IntraChainDoubleSpend(f"{op} already spent on this chain")
                spent_here.add(op)
            in_block[tx.tx_id] = tx

    def _index_txs(self, block: Block) -> None:
        bid = block.block_id
        for tx in block.txs:
            self.tx_index.setdefault(tx.tx_id, []).append(bid)
            for op in tx.outpoints():
                self.spend_index.setdefault(op, []).append(bid)

    def _connect(self, block: Block, t: float) -> None:
        self._validate(block)
        bid = block.block_id
        self.blocks[bid] = block
        self.children[bid] = []
        self.children[block.prev_id].append(bid)
        self.cumulative_work[bid] = self.cumulative_work[block.prev_id] + block.difficulty
        self.received[bid] = (t, self._counter)
        self._counter += 1
        self.tips.pop(block.prev_id, None)
        self.tips[bid] = None
        self._index_txs(block)
        if self.cumulative_work[bid] > self.cumulative_work[self.main_tip]:
            self._switch_to(bid)

    def _switch_to(self, new_tip: str) -> None:
        if self.blocks[new_tip].prev_id == self.main_tip:
            self.main.append(new_tip)
        else:
            fp = self.blocks[self.fork_point(self.main_tip, new_tip)]
            del self.main[fp.height + 1:]
            branch = []
            b = self.blocks[new_tip]
            while b.block_id != fp.block_id:
                branch.append(b.block_id)
                b = self.blocks[b.prev_id]
            self.main.extend(reversed(branch))
        self.main_tip = new_tip

    def _report(self, old_tip: str, new_tip: str) -> ReorgReport:
        fp = self.fork_point(old_tip, new_tip)
        fp_h = self.blocks[fp].height
        detached = self._branch(old_tip, fp_h)
        attached = self._branch(new_tip, fp_h)
        report = ReorgReport(old_tip, new_tip, detached, attached)
        if detached:
            kept = {t.tx_id for b in attached for t in b.txs}
            report.reversed_txs = [t for b in detached for t in b.txs
                                   if not t.is_coinbase and t.tx_id not in kept]
            spenders: dict[OutPoint, Transaction] = {}
            for b in attached:
                for t in b.txs:
                    for op in t.outpoints():
                        spenders[op] = t
            for victim in report.reversed_txs:
                for op in victim.outpoints():
                    other = spenders.get(op)
                    if other is not None and other.tx_id != victim.tx_id:
                        report.double_spent.append((victim, other))
                        break
        return report

    def _branch(self, tip: str, above_height: int) -> list[Block]:
        out = []
        b = self.blocks[tip]
        while b.height > above_height:
            out.append(b)
            b = self.blocks[b.prev_id]
        return out[::-1]

    # -- export ----------------------------------------------------------

    def records(self) -> list[dict]:
        order = sorted(self.blocks.values(), key=lambda b: (b.height, self.received[b.block_id][1]))
        return [{"coin": b.coin, "id": b.block_id, "prev": b.prev_id, "height": b.height,
                 "miner": b.miner, "time": b.timestamp, "work": self.cumulative_work[b.block_id],
                 "tx_count": b.tx_count} for b in order]

    def write_records(self, fh: IO[str]) -> None:
        for rec in self.records():
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def confirmations(tree: BlockTree, tx_id: str) -> int:
    b = tree.containing_main_block(tx_id)
    return 0 if b is None else tree.height - b.height + 1


def detect_conflicts(mempool: Iterable[Transaction]) -> list[list[Transaction]]:
    """Group transactions that (transitively) spend a common output.

    Only groups of two or more are returned, each sorted by ``tx_id``.
    """
    txs = sorted({t.tx_id: t for t in mempool}.values(), key=lambda t: t.tx_id)
    parent = list(range(len(txs)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    owner: dict[OutPoint, int] = {}
    for i, tx in enumerate(txs):
        for op in tx.outpoints():
            j = owner.setdefault(op, i)
            if j != i:
                parent[find(i)] = find(j)
    groups: dict[int, list[Transaction]] = {}
    for i, tx in enumerate(txs):
        groups.setdefault(find(i), []).append(tx)
    return [g for g in groups.values() if len(g) > 1]


@dataclass
class ForkStats:
    fork_rate: float
    depth_histogram: dict[int, int]
    n_blocks: int
    low_confidence: bool

    def rate_at_least(self, depth: int) -> float:
        n = sum(c for d, c in self.depth_histogram.items() if d >= depth)
        return n / self.n_blocks if self.n_blocks else 0.0


def fork_statistics(tree: BlockTree, min_blocks: int = 1000) -> ForkStats:
    """Orphan fraction and depth histogram of abandoned branches.

    An abandoned branch is a maximal subtree hanging off the main chain; its
    depth is the number of blocks on its longest path.  Genesis is excluded
    from the block count.
    """
    n = len(tree.blocks) - 1
    off_main = n - (len(tree.main) - 1)
    hist: dict[int, int] = {}
    depth_cache: dict[str, int] = {}

    def depth(bid: str) -> int:
        # iterative post-order over the subtree
        stack = [(bid, False)]
        while stack:
            node, done = stack.pop()
            if done:
                depth_cache[node] = 1 + max((depth_cache[c] for c in tree.children[node]), default=0)
            else:
                stack.append((node, True))
                stack.extend((c, False) for c in tree.children[node])
        return depth_cache[bid]

    for bid in tree.main:
        for child in tree.children[bid]:
            if not tree.on_main_chain(child):
                d = depth(child)
                hist[d] = hist.get(d, 0) + 1
    return ForkStats(off_main / n if n else 0.0, dict(sorted(hist.items())), n, n < min_blocks)
