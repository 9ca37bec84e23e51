"""Countermeasures against double spending and hidden mining.

* signature normal form (re-exported from :mod:`chainlab.signatures`)
* timestamp evidence and the pairwise adjudication rule
* chained confirmer peers
* share-based timestamp evidence
* a synchronous voting round over unique node lists
* a mining hash that cannot be computed without the previous block id
* paired evaluation of attack scenarios under each variant
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Protocol, Sequence

from .chain import Transaction
from .mining import Share
from .signatures import GROUP_ORDER, OutOfRange, Signature, normalize_signature
from .world import DefenseConfig

if TYPE_CHECKING:
    from .world import World

__all__ = [
    "GROUP_ORDER", "OutOfRange", "Signature", "normalize_signature", "DefenseConfig",
    "TimestampEvidence", "NoEvidence", "AcceptFirst", "RejectBoth", "earliest_credible_time",
    "adjudicate_pair", "adjudicate_set", "ConfirmerPeer", "InsufficientConfirmers",
    "ConfirmationPayment", "ConfirmationTree", "confirm_transaction", "share_evidence",
    "UNLNode", "rpca_round", "rpca_closed_sets", "plaintext_aware_hash", "verify_plaintext_aware",
    "DefenseReport", "evaluate_defense", "tx_admissible", "evidence_for",
    "evidence_acceptance_time", "install_evidence_sources",
]

EVIDENCE_SOURCES = ("node_observation", "confirmer_spend", "miner_share", "external_stamp")


# --------------------------------------------------------------------------
# timestamp evidence and adjudication


@dataclass(frozen=True)
class TimestampEvidence:
    tx_id: str
    source: str
    observed_at: float
    weight: float = 1.0

    def __post_init__(self) -> None:
        if self.source not in EVIDENCE_SOURCES:
            raise ValueError(f"unknown evidence source {self.source!r}")
        if self.weight < 0:
            raise ValueError("evidence weight must be non-negative")


class NoEvidence(LookupError):
    """Neither transaction has credible evidence yet; decision is deferred."""


@dataclass(frozen=True)
class AcceptFirst:
    tx: Transaction

    def __repr__(self) -> str:
        return f"AcceptFirst({self.tx.tx_id[:10]})"


@dataclass(frozen=True)
class RejectBoth:
    def __repr__(self) -> str:
        return "RejectBoth()"


def earliest_credible_time(tx: Transaction, evidence: Iterable[TimestampEvidence],
                           min_weight: float = 1.0, max_latency: float = math.inf) -> float | None:
    """First time at which the accumulated evidence weight for ``tx`` reaches ``min_weight``.

    Evidence dated before ``tx.created_at - max_latency`` is physically
    impossible for an honest observer and is discarded.
    """
    floor = tx.created_at - max_latency
    items = sorted((e.observed_at, e.weight) for e in evidence
                   if e.tx_id == tx.tx_id and e.observed_at >= floor)
    total = 0.0
    for t, w in items:
        total += w
        if total >= min_weight:
            return t
    return None


def adjudicate_set(txs: Sequence[Transaction], evidence: Iterable[TimestampEvidence],
                   threshold: float = 20.0, *, min_weight: float = 1.0, max_latency: float = math.inf,
                   accept_any: bool = False):
    """Adjudicate a whole conflict set; the two earliest transactions decide.

    Returns :class:`AcceptFirst` or :class:`RejectBoth`.  A transaction with
    no credible evidence counts as never seen.  Raises :class:`NoEvidence`
    when nothing in the set has evidence.
    """
    evidence = list(evidence)
    timed = []
    for tx in txs:
        t = earliest_credible_time(tx, evidence, min_weight, max_latency)
        if t is not None:
            timed.append((t, tx.tx_id, tx))
    if not timed:
        raise NoEvidence("no credible evidence for any transaction in the set")
    timed.sort(key=lambda x: (x[0], x[1]))
    if len(timed) == 1:
        return AcceptFirst(timed[0][2])
    (t1, _, first), (t2, _, _) = timed[0], timed[1]
    if t2 - t1 > threshold or accept_any:
        return AcceptFirst(first)
    return RejectBoth()


def adjudicate_pair(tx1: Transaction, tx2: Transaction, evidence: Iterable[TimestampEvidence],
                    threshold: float = 20.0, **kw):
    """Pairwise rule: accept the earlier transaction only if the gap strictly exceeds ``threshold``."""
    if not set(tx1.outpoints()) & set(tx2.outpoints()):
        raise ValueError("transactions do not conflict")
    return adjudicate_set((tx1, tx2), evidence, threshold, **kw)


def evidence_for(world: "World", tx: Transaction) -> list[TimestampEvidence]:
    """Evidence an honest node can cite for ``tx`` right now."""
    out = list(world.evidence.get(tx.tx_id, ()))
    t = world.honest_first_seen(tx)
    if t is not None:
        out.append(TimestampEvidence(tx.tx_id, "node_observation", t, 1.0))
    return out


def tx_admissible(world: "World", tx: Transaction) -> bool:
    """Whether honest nodes may mine ``tx`` under the world's defense config."""
    conflicts = world.known_conflicts(tx)
    if not conflicts:
        return True
    d = world.defense
    group = [tx, *sorted(conflicts, key=lambda t: t.tx_id)]
    if d.timestamp:
        evidence = [e for t in group for e in evidence_for(world, t)]
        try:
            verdict = adjudicate_set(group, evidence, d.threshold, min_weight=d.min_weight,
                                     max_latency=world.latency.max_credible, accept_any=d.accept_any_on_tie)
        except NoEvidence:
            return False
        if not (isinstance(verdict, AcceptFirst) and verdict.tx.tx_id == tx.tx_id):
            return False
    if d.rpca:
        honest = [n for n in world.nodes.values() if n.honest]
        ids = tuple(n.id for n in honest)
        unl = [UNLNode(n.id, ids, {t.tx_id: t.first_seen[n.id] for t in group if n.id in t.first_seen})
               for n in honest]
        closed = rpca_round(unl, group)
        if tx.tx_id not in {t.tx_id for t in closed}:
            return False
    return True


def evidence_acceptance_time(world: "World", tx: Transaction, required_weight: float = 3.0) -> float | None:
    """When a merchant relying on evidence (not blocks) could accept ``tx``.

    It needs ``required_weight`` of credible evidence and the adjudication
    window to have passed since the first observation without a conflict.
    Returns an absolute time or ``None``.
    """
    if world.known_conflicts(tx):
        return None
    ev = evidence_for(world, tx)
    first = earliest_credible_time(tx, ev, world.defense.min_weight)
    enough = earliest_credible_time(tx, ev, required_weight)
    if first is None or enough is None:
        return None
    return max(enough, first + world.defense.threshold)


def install_evidence_sources(world: "World") -> None:
    """Start confirmer chains and share evidence for every broadcast payment."""
    d = world.defense
    started: dict[str, None] = {}

    def add(ev: TimestampEvidence) -> None:
        world.evidence.setdefault(ev.tx_id, []).append(ev)

    def on_tx(node_id: str, tx: Transaction, t: float) -> None:
        if tx.tx_id in started or not world.nodes[node_id].honest:
            return
        started[tx.tx_id] = None
        from functools import partial
        from .sim import EventKind
        if d.confirmers:
            peers = [n for n in world.nodes if world.nodes[n].honest]
            tree = confirm_transaction(tx, d.confirmer_k, 1e-4, peers, allow_reuse=True)
            stream = world.rng(f"confirmers:{tx.tx_id[:16]}")
            at = t
            for level in tree.levels:
                at += d.confirmer_delay + float(world.latency.draw(stream))
                for pay in level:
                    world.sim.schedule(at, EventKind.CONFIRMER_ACTION,
                                       partial(add, TimestampEvidence(tx.tx_id, "confirmer_spend", at, 1.0)))
        if d.shares:
            stream = world.rng(f"share-evidence:{tx.tx_id[:16]}")
            at = t
            for _ in range(8):
                at += float(stream.exponential(1.0 / d.share_rate))
                zeros = d.share_min_zeros + int(stream.geometric(0.5)) - 1
                ev = share_evidence(Share("network", 0, zeros, at), d.share_min_zeros, tx.tx_id)
                world.sim.schedule(at, EventKind.CONFIRMER_ACTION, partial(add, ev))

    world.tx_listeners.append(on_tx)


# --------------------------------------------------------------------------
# confirmer peers


class InsufficientConfirmers(ValueError):
    pass


@dataclass
class ConfirmerPeer:
    node_id: str
    last_active_height: int = 0
    served: int = 0
    failures: int = 0

    def active(self, current_height: int, window: int = 2016) -> bool:
        return current_height - self.last_active_height < window


@dataclass(frozen=True)
class ConfirmationPayment:
    level: int
    payee: str
    received: float
    kept: float
    forwarded: float
    funded_by: tuple[str, ...]
    pay_id: str


@dataclass
class ConfirmationTree:
    tx_id: str
    k: int
    fee_unit: float
    levels: list[list[ConfirmationPayment]] = field(default_factory=list)
    reused: bool = False

    @property
    def payments(self) -> list[ConfirmationPayment]:
        return [p for level in self.levels for p in level]

    @property
    def total_paid(self) -> float:
        return math.fsum(p.kept for p in self.payments)

    @property
    def depth(self) -> int:
        return len(self.levels)

    def net_by_peer(self) -> dict[str, float]:
        out: dict[str, float] = {}
        for p in self.payments:
            out[p.payee] = out.get(p.payee, 0.0) + p.received - p.forwarded
        return out


def _select(tx_id: str, level: int, slot: int, peers: list[str], digest: str) -> int:
    h = hashlib.sha256(f"{tx_id}|{level}|{slot}|{digest}".encode()).digest()
    return int.from_bytes(h[:8], "big") % len(peers)


def confirm_transaction(tx: Transaction | str, k: int, fee_unit: float,
                        confirmer_list: Sequence[ConfirmerPeer | str], current_height: int | None = None,
                        *, window: int = 2016, allow_reuse: bool = False) -> ConfirmationTree:
    """Build the chain of confirmer payments for ``tx``.

    Two peers per level, ``k`` levels.  A level-``j`` peer receives
    ``(k - j + 1) * fee_unit`` in total, keeps ``fee_unit`` and forwards the
    rest split equally to the two peers of the next level, so every payment
    of level ``j + 1`` spends outputs of both level-``j`` peers.  Peers are
    picked by hashing the transaction id with a digest of the eligible list.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    tx_id = tx.tx_id if isinstance(tx, Transaction) else tx
    peers = []
    for p in confirmer_list:
        if isinstance(p, str):
            peers.append(p)
        elif current_height is None or p.active(current_height, window):
            peers.append(p.node_id)
    peers = sorted(dict.fromkeys(peers))
    need = 2 * k
    if not peers:
        raise InsufficientConfirmers("no eligible confirmer peers")
    reused = len(peers) < need
    if reused and not allow_reuse:
        raise InsufficientConfirmers(f"{len(peers)} eligible peers, {need} needed")
    digest = hashlib.sha256("\n".join(peers).encode()).hexdigest()
    used: dict[str, None] = {}
    tree = ConfirmationTree(tx_id, k, fee_unit, reused=reused)
    funders: tuple[str, ...] = (tx_id,)
    for level in range(1, k + 1):
        received = (k - level + 1) * fee_unit
        forwarded = received - fee_unit
        row = []
        for slot in range(2):
            i = _select(tx_id, level, slot, peers, digest)
            if not reused:
                while peers[i] in used:
                    i = (i + 1) % len(peers)
            used[peers[i]] = None
            pay_id = hashlib.sha256(f"{tx_id}|{level}|{slot}|{peers[i]}".encode()).hexdigest()
            row.append(ConfirmationPayment(level, peers[i], received, fee_unit, forwarded, funders, pay_id))
        tree.levels.append(row)
        funders = tuple(p.pay_id for p in row)
    return tree


# --------------------------------------------------------------------------
# share evidence


def share_evidence(share: Share, min_zeros: int = 48, tx_id: str = "") -> TimestampEvidence | None:
    if share.zeros < min_zeros:
        return None
    return TimestampEvidence(tx_id, "miner_share", share.found_at, 2.0 ** (share.zeros - min_zeros))


# --------------------------------------------------------------------------
# voting rounds


RPCA_THRESHOLDS = (0.5, 0.6, 0.7, 0.8)


@dataclass
class UNLNode:
    node_id: str
    unique_node_list: tuple[str, ...]
    seen: dict[str, float] = field(default_factory=dict)   # tx_id -> time first seen

    def __post_init__(self) -> None:
        if not self.unique_node_list:
            raise ValueError(f"{self.node_id}: unique node list is empty")


def _initial_votes(node: UNLNode, candidates: Sequence[Transaction]) -> set[str]:
    # a node backs what it saw, unless it conflicts with something it saw earlier
    order = sorted((node.seen[c.tx_id], c.tx_id, c) for c in candidates if c.tx_id in node.seen)
    spent: set = set()
    yes = set()
    for _, tid, c in order:
        ops = set(c.outpoints())
        if ops & spent:
            continue
        spent |= ops
        yes.add(tid)
    return yes


def rpca_closed_sets(nodes: Sequence[UNLNode], candidates: Iterable[Transaction],
                     thresholds: Sequence[float] = RPCA_THRESHOLDS) -> dict[str, frozenset[str]]:
    """Per-node closed sets (tx ids) after synchronous voting rounds.

    Each round a node withdraws its YES from any candidate backed by fewer
    than the round's threshold of its unique node list.  A node then closes
    every candidate that still has final-threshold support among its list,
    whether or not it voted for it itself.
    """
    if list(thresholds) != sorted(thresholds):
        raise ValueError("round thresholds must be non-decreasing")
    candidates = list(candidates)
    votes = {n.node_id: _initial_votes(n, candidates) for n in nodes}

    def support(n: UNLNode, tid: str) -> float:
        unl = [m for m in n.unique_node_list if m in votes]
        return sum(1 for m in unl if tid in votes[m]) / len(unl) if unl else 0.0

    for theta in thresholds:
        votes = {n.node_id: {t for t in votes[n.node_id] if support(n, t) >= theta} for n in nodes}
    final = thresholds[-1] if thresholds else 0.0
    ids = sorted(set().union(*votes.values())) if votes else []
    return {n.node_id: frozenset(t for t in ids if support(n, t) >= final) for n in nodes}


def rpca_round(nodes: Sequence[UNLNode], candidates: Iterable[Transaction], rounds: int = 4,
               final_threshold: float = 0.8) -> list[Transaction]:
    """Transactions closed by every node, in tx-id order."""
    candidates = list(candidates)
    if rounds < 1:
        raise ValueError("need at least one round")
    base = list(RPCA_THRESHOLDS[:-1])[-(rounds - 1):] if rounds > 1 else []
    thresholds = [min(t, final_threshold) for t in base] + [final_threshold]
    sets = rpca_closed_sets(nodes, candidates, thresholds)
    common = frozenset.intersection(*sets.values()) if sets else frozenset()
    return sorted((c for c in candidates if c.tx_id in common), key=lambda c: c.tx_id)


# --------------------------------------------------------------------------
# plaintext-aware hashing


def _as_bytes(value: bytes | str) -> bytes:
    return bytes.fromhex(value) if isinstance(value, str) else bytes(value)


def plaintext_aware_hash(header: bytes | str, prev_block_id: bytes | str) -> bytes:
    """SHA-256 of ``prev_block_id`` XOR SHA-256(header)."""
    if isinstance(header, str):
        header = header.encode()
    prev = _as_bytes(prev_block_id)
    if len(prev) != 32:
        raise ValueError("previous block id must be 256 bits")
    inner = hashlib.sha256(header).digest()
    return hashlib.sha256(bytes(a ^ b for a, b in zip(prev, inner))).digest()


def verify_plaintext_aware(header: bytes | str, prev_block_id: bytes | str, digest: bytes) -> bool:
    return plaintext_aware_hash(header, prev_block_id) == digest


# --------------------------------------------------------------------------
# evaluation


class AttackScenario(Protocol):
    name: str

    def run(self, seed: int, defense: DefenseConfig): ...


@dataclass
class DefenseReport:
    variant: str
    seeds: list[int]
    outcomes: list

    @property
    def successes(self) -> list[bool]:
        return [o.success for o in self.outcomes]

    @property
    def success_rate(self) -> float:
        return sum(self.successes) / len(self.outcomes) if self.outcomes else 0.0

    @property
    def detections(self) -> int:
        return sum(1 for o in self.outcomes if o.detected)

    @property
    def acceptance_times(self) -> list[float]:
        return [o.acceptance_time for o in self.outcomes if o.acceptance_time is not None]

    def summary(self) -> dict:
        acc = sorted(self.acceptance_times)
        return {
            "variant": self.variant,
            "runs": len(self.outcomes),
            "success_rate": self.success_rate,
            "detections": self.detections,
            "acceptance_median_s": acc[len(acc) // 2] if acc else None,
        }


def evaluate_defense(scenario: AttackScenario, variant: str | DefenseConfig,
                     seeds: Iterable[int] = range(100)) -> DefenseReport:
    """Run ``scenario`` once per seed with the given defense variant.

    Runs with the same seed under different variants share every random
    stream, so reports are directly comparable seed by seed.
    """
    config = variant if isinstance(variant, DefenseConfig) else DefenseConfig.variant(variant)
    name = variant if isinstance(variant, str) else "custom"
    seeds = list(seeds)
    return DefenseReport(name, seeds, [scenario.run(s, config) for s in seeds])
