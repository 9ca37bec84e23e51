import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from chainlab.chain import (NO_CHANGE, STAGED, BlockTree, IntraChainDoubleSpend, InvalidReward,
                            OutPoint, UnknownInput, confirmations, detect_conflicts,
                            fork_statistics, genesis_block, make_block, spend)
from chainlab.economics import preset, reward_at

BTC = preset("BTC")


def fresh(alloc=(("alice", 10.0),)):
    g = genesis_block(BTC, alloc)
    return BlockTree(BTC, g), g


def extend(parent, miner="m", t=None, txs=(), diff=1.0):
    return make_block(BTC, parent, miner, parent.timestamp + 1 if t is None else t, diff, txs)


def test_extend_tip():
    tree, g = fresh()
    b1 = extend(g)
    rep = tree.accept_block(b1)
    assert rep.new_tip == b1.block_id and not rep.detached
    assert tree.tip == b1


def test_competing_block_does_not_switch():
    tree, g = fresh()
    a, b = extend(g, "a"), extend(g, "b")
    tree.accept_block(a)
    assert tree.accept_block(b) is NO_CHANGE
    assert tree.tip == a
    assert set(tree.tips) == {a.block_id, b.block_id}


def test_reorg_reports_double_spend():
    tree, g = fresh()
    src = g.txs[0].out(0)
    pay = spend([(src, 10.0)], "alice", [("merchant", 10.0)], tag="pay")
    back = spend([(src, 10.0)], "alice", [("alice2", 10.0)], tag="back")
    h1 = extend(g, "honest", txs=[pay])
    tree.accept_block(h1)
    a1 = extend(g, "att", txs=[back])
    a2 = extend(a1, "att")
    assert tree.accept_block(a1) is NO_CHANGE
    rep = tree.accept_block(a2)
    assert [b.block_id for b in rep.detached] == [h1.block_id]
    assert [b.block_id for b in rep.attached] == [a1.block_id, a2.block_id]
    assert len(rep.double_spent) == 1
    assert rep.double_spent[0][0].tx_id == pay.tx_id


def test_reorg_symmetry():
    tree, g = fresh()
    main = [g]
    for i in range(4):
        main.append(extend(main[-1], "h"))
        tree.accept_block(main[-1])
    side = [main[1]]
    for i in range(4):
        side.append(extend(side[-1], "x"))
    for b in side[1:]:
        rep = tree.accept_block(b)
    replay = BlockTree(BTC, g)
    fp = tree.blocks[tree.fork_point(rep.old_tip, rep.new_tip)]
    for b in [x for x in main[1:] if x.height <= fp.height] + rep.detached:
        replay.accept_block(b)
    assert replay.main == [b.block_id for b in main]


def test_orphan_staged_then_connected():
    tree, g = fresh()
    b1 = extend(g)
    b2 = extend(b1)
    assert tree.accept_block(b2) is STAGED
    rep = tree.accept_block(b1)
    assert tree.tip == b2 and rep.new_tip == b2.block_id


def test_invalid_reward_rejected():
    tree, g = fresh()
    bad = make_block(preset("BTC", reward_schedule=((0, 51.0),)), g, "m", 1.0, 1.0)
    with pytest.raises(InvalidReward):
        tree.accept_block(bad)


def test_double_spend_within_chain_rejected():
    tree, g = fresh()
    src = g.txs[0].out(0)
    t1 = spend([(src, 10.0)], "alice", [("bob", 10.0)], tag="1")
    t2 = spend([(src, 10.0)], "alice", [("carol", 10.0)], tag="2")
    b1 = extend(g, txs=[t1])
    tree.accept_block(b1)
    with pytest.raises(IntraChainDoubleSpend):
        tree.accept_block(extend(b1, txs=[t2]))


def test_wrong_owner_rejected():
    tree, g = fresh()
    src = g.txs[0].out(0)
    thief = spend([(src, 10.0)], "mallory", [("mallory", 10.0)])
    with pytest.raises(UnknownInput):
        tree.accept_block(extend(g, txs=[thief]))


def test_confirmations():
    tree, g = fresh()
    src = g.txs[0].out(0)
    pay = spend([(src, 10.0)], "alice", [("bob", 10.0)])
    b = extend(g, txs=[pay])
    tree.accept_block(b)
    assert confirmations(tree, pay.tx_id) == 1
    for _ in range(6):
        b = extend(b)
        tree.accept_block(b)
    assert confirmations(tree, pay.tx_id) == 7
    fork_tx = spend([(src, 10.0)], "alice", [("eve", 10.0)], tag="f")
    tree.accept_block(extend(g, "x", txs=[fork_tx]))
    assert confirmations(tree, fork_tx.tx_id) == 0


def _txs_from_spends(spends):
    txs = {}
    for name, ops in spends.items():
        txs[name] = spend([(OutPoint("f" * 64, i), 1.0) for i in sorted(ops)], "k",
                          [(name, float(len(ops)))], tag=name)
    return txs


def test_conflicts_basic():
    txs = _txs_from_spends({"A": {1}, "B": {1}, "C": {2}})
    groups = detect_conflicts(txs.values())
    assert len(groups) == 1 and {t.tx_id for t in groups[0]} == {txs["A"].tx_id, txs["B"].tx_id}
    assert detect_conflicts(_txs_from_spends({"A": {1}, "B": {2}}).values()) == []


def test_conflicts_transitive():
    txs = _txs_from_spends({"A": {1}, "B": {1, 2}, "C": {2}})
    groups = detect_conflicts(txs.values())
    assert len(groups) == 1 and len(groups[0]) == 3


@settings(max_examples=60, deadline=None)
@given(st.dictionaries(st.sampled_from("ABCDEFGHIJ"),
                       st.sets(st.integers(0, 8), min_size=1, max_size=3), min_size=1))
def test_conflicts_match_oracle(spends):
    txs = _txs_from_spends(spends)
    by_id = {t.tx_id: name for name, t in txs.items()}
    got = sorted(sorted(by_id[t.tx_id] for t in g) for g in detect_conflicts(txs.values()))
    want = sorted(sorted(c) for c in oracles.conflict_components(spends))
    assert got == want


def test_fork_statistics_linear():
    tree, g = fresh()
    b = g
    for _ in range(20):
        b = extend(b)
        tree.accept_block(b)
    st_ = fork_statistics(tree)
    assert st_.fork_rate == 0 and st_.depth_histogram == {} and st_.low_confidence


def test_fork_statistics_depths():
    tree, g = fresh()
    main = [g]
    for _ in range(6):
        main.append(extend(main[-1], "h"))
        tree.accept_block(main[-1])
    s1 = extend(main[2], "x")
    s2 = extend(s1, "x")
    tree.accept_block(s1)
    tree.accept_block(s2)
    tree.accept_block(extend(main[4], "y"))
    st_ = fork_statistics(tree)
    assert st_.depth_histogram == {1: 1, 2: 1}
    assert st_.fork_rate == pytest.approx(3 / 9)
    assert st_.rate_at_least(2) == pytest.approx(1 / 9)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_random_trees_keep_invariants(seed):
    rnd = random.Random(seed)
    tree, g = fresh(alloc=[(f"k{i}", 1.0) for i in range(5)])
    blocks = [g]
    unspent = [g.txs[i].out(0) for i in range(5)]
    best = 0.0
    for step in range(30):
        parent = rnd.choice(blocks[-6:])
        txs = []
        if unspent and rnd.random() < 0.3:
            op = rnd.choice(unspent)
            src = next(t for t in g.txs if t.tx_id == op.tx_id)
            owner = src.outputs[op.index].recipient
            txs = [spend([(op, 1.0)], owner, [("z", 1.0)], tag=str(step))]
        b = make_block(BTC, parent, f"m{step % 3}", float(step + 1), rnd.choice([1.0, 2.0]), txs)
        try:
            tree.accept_block(b)
        except IntraChainDoubleSpend:
            continue
        blocks.append(b)
        w = tree.cumulative_work[tree.main_tip]
        assert w >= best
        best = w
    chain = tree.main_chain()
    minted = math.fsum(b.txs[0].outputs[0].amount for b in chain[1:])
    assert minted == pytest.approx(math.fsum(reward_at(BTC, b.height) for b in chain[1:]))
    spent = [op for b in chain for t in b.txs for op in t.outpoints()]
    assert len(spent) == len(set(spent))


def test_records_export(tmp_path):
    import io
    import json
    tree, g = fresh()
    tree.accept_block(extend(g))
    buf = io.StringIO()
    tree.write_records(buf)
    rows = [json.loads(x) for x in buf.getvalue().splitlines()]
    assert [r["height"] for r in rows] == [0, 1]
    assert set(rows[0]) == {"coin", "id", "prev", "height", "miner", "time", "work", "tx_count"}
