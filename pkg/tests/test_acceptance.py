"""Acceptance criteria 1-10.

Each test records one PASS/FAIL line in ``conftest.ACCEPTANCE``; the lines
are printed in an "acceptance criteria" section at the end of the pytest run.
Run just this file with ``pytest tests/test_acceptance.py -v``.
"""

import math
import random
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction

import pytest

import conftest
import oracles
from chainlab.attacks import (DoubleSpendScenario, RaceSetup, catch_up_probability,
                              catch_up_probability_exact, dogecoin_attack_setup, hidden_fork_attack,
                              hidden_fork_world)
from chainlab.chain import OutPoint
from chainlab.defenses import (AcceptFirst, DefenseConfig, RejectBoth, TimestampEvidence,
                               adjudicate_pair, evaluate_defense)
from chainlab.attacks import make_payment_pair
from chainlab.economics import investor_return, preset, reward_at, schedule_drop_factor
from chainlab.experiments import BASE_LATENCY, measure_forks, run_halving, tune_latency_scale
from chainlab.scenario import bundled_scenarios, parse_scenario, run

# every AttackOutcome produced below, for the accounting part of criterion 9
OUTCOMES = []


def record(n, title, ok, detail):
    conftest.ACCEPTANCE[n] = f"criterion {n:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"


# 1 -------------------------------------------------------------------------


def test_c01_investor_identity():
    a = investor_return(2000, 0.5)
    b = investor_return(1, 0.5)
    exact = investor_return(Fraction(2000), Fraction(1, 2))
    ok = a == 4000 and b == 2 and exact == 4000
    record(1, "geometric investor identity", ok, f"(2000, 1/2) -> {a}, (1, 1/2) -> {b}")
    assert ok


# 2 -------------------------------------------------------------------------

# Unobtanium reward table: (first height, last height or None, reward)
UNO_TABLE = [
    (1, 101_999, 1.0),
    (102_000, 203_999, 0.5),
    (204_000, 299_999, 0.25),
    (300_000, 407_999, 0.125),
    (408_000, 509_999, 0.0625),
    (510_000, 611_999, 0.03125),
    (612_000, None, 0.0001),
]


def test_c02_uno_schedule():
    uno = preset("UNO")
    bad = []
    for lo, hi, want in UNO_TABLE:
        probes = [lo, lo + 1] + ([hi - 1, hi, (lo + hi) // 2] if hi else [lo + 10 ** 5])
        bad += [(h, reward_at(uno, h), want) for h in probes if reward_at(uno, h) != want]
    factor = schedule_drop_factor(uno, -1)
    ok = not bad and factor == 312.5
    record(2, "UNO schedule fidelity", ok, f"{len(UNO_TABLE)} segments, {len(bad)} mismatches, "
           f"final drop factor {factor}")
    assert ok, bad


# 3 -------------------------------------------------------------------------


def test_c03_halving_migration():
    ratios = [run_halving(seed).ratio for seed in range(20)]
    ok = all(0.45 <= r <= 0.55 for r in ratios)
    record(3, "hash rate halves after reward halving", ok,
           f"20 seeds, ratio at +50 ticks in [{min(ratios):.3f}, {max(ratios):.3f}]")
    assert ok


# 4 -------------------------------------------------------------------------


def test_c04_fork_square_law():
    scale = tune_latency_scale(target=0.01)
    stats = measure_forks(1, BASE_LATENCY.scaled(scale), 10 ** 5)
    n = stats.n_blocks
    p = stats.fork_rate
    deep = stats.rate_at_least(2)
    want = p * p
    sigma = math.sqrt(want * (1 - want) / n)
    ok_rate = 0.008 <= p <= 0.012
    ok_deep = abs(deep - want) <= 3 * sigma
    record(4, "fork square law", ok_rate and ok_deep,
           f"latency x{scale:.3f}, {n} blocks, fork rate {p:.5f}, P(depth>=2) {deep:.2e} "
           f"vs rate^2 {want:.2e} ({(deep - want) / sigma:+.2f} sigma)")
    assert n >= 10 ** 5
    assert ok_rate
    assert ok_deep


# 5 -------------------------------------------------------------------------

GRID = [(q, z) for q in (0.1, 0.3, 0.45) for z in (1, 2, 6)]
SEEDS = 1000
C5 = {}


def _race_cell(cell):
    q, z = cell
    sc = DoubleSpendScenario(RaceSetup(q=q, z_wait=z, deadline=600.0 * 1000, give_up_deficit=60))
    return [sc.run(seed) for seed in range(SEEDS)]


@pytest.fixture(scope="module")
def race_grid():
    with ProcessPoolExecutor() as ex:
        results = dict(zip(GRID, ex.map(_race_cell, GRID)))
    for outs in results.values():
        OUTCOMES.extend(outs)
    return {cell: sum(o.success for o in outs) / SEEDS for cell, outs in results.items()}


def _c5_line():
    mc, closed, exact = C5.get("mc"), C5.get("closed"), C5.get("exact")
    parts = []
    if mc:
        parts.append(f"closed form {mc[0]:.6f} vs 1e7-trial walk {mc[1]:.7f} ({mc[2]:.1%} rel)")
    if closed:
        parts.append(f"closed form: {closed[0]}/9 cells within 3 sigma (worst {closed[1]:+.2f})")
    if exact:
        parts.append(f"pre-mine race odds: {exact[0]}/9 within 3 sigma (worst {exact[1]:+.2f})")
    ok = bool(mc and mc[3]) and bool(closed and closed[0] == 9)
    record(5, "catch-up oracle agreement", ok, "; ".join(parts))


@pytest.mark.slow
def test_c05a_closed_form_matches_random_walk():
    mc = oracles.nakamoto_mc(0.1, 6, 10 ** 7, 20140101)
    closed = catch_up_probability(0.1, 6)
    rel = abs(closed - mc) / mc
    C5["mc"] = (closed, mc, rel, rel < 0.10)
    _c5_line()
    assert rel < 0.10


def _zscores(rates, oracle):
    out = {}
    for cell, r in rates.items():
        p = oracle(*cell)
        sigma = oracles.binomial_sigma(p, SEEDS)
        out[cell] = 0.0 if sigma == 0 and r == p else (r - p) / sigma if sigma else math.inf
    return out


def test_c05b_race_vs_closed_form(race_grid):
    z = _zscores(race_grid, catch_up_probability)
    inside = sum(abs(v) <= 3 for v in z.values())
    C5["closed"] = (inside, max(z.values(), key=abs))
    _c5_line()
    if inside != len(GRID):
        far = {c: round(v, 2) for c, v in z.items() if abs(v) > 3}
        pytest.xfail(f"Poisson closed form is an approximation; cells beyond 3 sigma: {far}")


def test_c05c_race_vs_exact_odds(race_grid):
    z = _zscores(race_grid, catch_up_probability_exact)
    inside = sum(abs(v) <= 3 for v in z.values())
    C5["exact"] = (inside, max(z.values(), key=abs))
    _c5_line()
    assert inside == len(GRID), z


# 6 -------------------------------------------------------------------------


def test_c06_twenty_second_rule():
    tx1, tx2 = make_payment_pair(OutPoint("ab" * 32, 0), 1.0, "att", "shop")
    rnd = random.Random(0)
    wrong = []
    for gap in (0.0, 5.0, 19.9, 20.0, 20.1, 60.0):
        ev = [TimestampEvidence(tx1.tx_id, "node_observation", 1000.0),
              TimestampEvidence(tx2.tx_id, "node_observation", 1000.0 + gap)]
        want = AcceptFirst(tx1) if gap > 20 else RejectBoth()
        if gap == 0.0:
            want = RejectBoth()
        verdicts = set()
        for _ in range(10):     # ten nodes seeing the same evidence in different orders
            shuffled = ev[:]
            rnd.shuffle(shuffled)
            pair = (tx1, tx2) if rnd.random() < 0.5 else (tx2, tx1)
            verdicts.add(adjudicate_pair(*pair, shuffled))
        if verdicts != {want}:
            wrong.append((gap, verdicts))
    ok = not wrong
    record(6, "20-second rule", ok, f"6 gaps x 10 nodes, {len(wrong)} wrong or inconsistent")
    assert ok, wrong


# 7 -------------------------------------------------------------------------


def test_c07_hidden_fork_and_cure():
    equal = 0
    for seed in range(20):
        traces = []
        for strategy in ("honest", "hidden_fork"):
            w, plan, pool = hidden_fork_world(seed, 0.45, 2, strategy=strategy)
            traces.append(hidden_fork_attack(w, pool, plan, horizon=3 * 3600.0).traces)
        equal += traces[0] == traces[1]
    caught = 0
    for seed in range(20):
        w, plan, pool = hidden_fork_world(seed, 0.45, 2, defense=DefenseConfig.variant("plaintext_aware"))
        res = hidden_fork_attack(w, pool, plan)
        OUTCOMES.append(res.outcome)
        caught += res.detections > 0 or (res.disclosure_error and not res.outcome.success)
    ok = equal == 20 and caught == 20
    record(7, "hidden attack indistinguishable under h0_only, caught under plaintext-aware", ok,
           f"{equal}/20 identical member traces, {caught}/20 runs detected")
    assert ok


# 8 -------------------------------------------------------------------------


def test_c08_defense_monotonicity():
    setup = dogecoin_attack_setup()
    block_value = reward_at(preset(setup.coin), 1) * setup.price
    sc = DoubleSpendScenario(setup)
    seeds = range(500)
    base = evaluate_defense(sc, "baseline", seeds)
    hard = evaluate_defense(sc, "confirmers", seeds)       # timestamps + confirmer peers
    OUTCOMES.extend(base.outcomes + hard.outcomes)
    paired = all(h <= b for h, b in zip(hard.successes, base.successes))
    strict = hard.success_rate < base.success_rate
    ok = paired and strict and math.isclose(block_value, 120.0) and setup.budget == 600.0
    record(8, "defense monotonicity on the small-coin attack", ok,
           f"block value {block_value:.0f} USD, budget {setup.budget:.0f} USD, success "
           f"{base.success_rate:.3f} baseline -> {hard.success_rate:.3f} with timestamps+confirmers, "
           f"paired <= on {sum(h <= b for h, b in zip(hard.successes, base.successes))}/500")
    assert ok


# 9 and 10 ------------------------------------------------------------------


def test_c09_conservation(tmp_path):
    problems = []
    for path in bundled_scenarios():
        summary = run(parse_scenario(path), tmp_path / path.stem)
        for coin, rep in summary.conservation.items():
            if coin == "_attacks":
                if not rep["net_equals_revenue_minus_spent"]:
                    problems.append((path.stem, coin))
            elif not (rep["supply_matches"] and rep["no_double_spend_on_main"]):
                problems.append((path.stem, coin, rep))
    bad_net = [o for o in OUTCOMES if o.net != o.revenue - o.spent]
    ok = not problems and not bad_net
    record(9, "conservation", ok,
           f"{len(bundled_scenarios())} scenarios, {len(problems)} supply/double-spend problems; "
           f"{len(OUTCOMES)} attack outcomes, {len(bad_net)} with net != revenue - spent")
    assert ok, problems


def test_c10_determinism(tmp_path):
    differ = []
    files = 0
    for path in bundled_scenarios():
        sc = parse_scenario(path)
        a, b = tmp_path / f"{path.stem}_a", tmp_path / f"{path.stem}_b"
        run(sc, a)
        run(sc, b)
        for f in sorted(a.iterdir()):
            if f.name == "timing.json":
                continue
            files += 1
            if f.read_bytes() != (b / f.name).read_bytes():
                differ.append(f"{path.stem}/{f.name}")
    ok = not differ
    record(10, "determinism", ok, f"{files} output files compared, {len(differ)} differ")
    assert ok, differ


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
