"""The oracles reproduce their frozen values, and the library agrees with them."""

import math

import pytest

import oracles as o
from chainlab.attacks import catch_up_probability, catch_up_probability_exact
from chainlab.network import calibrate_lognormal

F = o.FROZEN


def test_lognormal_oracle_frozen():
    mu, sigma = o.lognormal_params(6.5, 12.6)
    assert mu == pytest.approx(F["lognormal_mu"], abs=1e-12)
    assert sigma == pytest.approx(F["lognormal_sigma"], abs=1e-12)
    assert calibrate_lognormal(6.5, 12.6) == pytest.approx((mu, sigma), abs=1e-12)


@pytest.mark.parametrize("key", sorted(F["nakamoto"]))
def test_closed_form_oracles_frozen(key):
    assert o.nakamoto(*key) == pytest.approx(F["nakamoto"][key], abs=1e-11)
    assert o.exact_race(*key) == pytest.approx(F["exact_race"][key], abs=1e-11)
    assert catch_up_probability(*key) == pytest.approx(F["nakamoto"][key], abs=1e-11)
    assert catch_up_probability_exact(*key) == pytest.approx(F["exact_race"][key], abs=1e-11)


def test_exact_race_by_state_enumeration():
    # propagate probability over (honest, attacker) block counts step by step
    q, z = 0.3, 2
    p = 1 - q
    states = {(0, 1): 1.0}      # attacker starts with its pre-mined block
    won = 0.0
    for _ in range(300):
        nxt = {}
        for (h, a), pr in states.items():
            for (dh, da), w in (((1, 0), p), ((0, 1), q)):
                s = (h + dh, a + da)
                if s[0] >= z and s[1] > s[0]:
                    won += pr * w
                elif s[1] - s[0] > -40:
                    nxt[s] = nxt.get(s, 0.0) + pr * w
        states = nxt
    assert won == pytest.approx(o.exact_race(q, z), abs=1e-9)


def test_conflict_oracle_transitive():
    comps = o.conflict_components({"A": {1}, "B": {1, 2}, "C": {2}, "D": {3}})
    assert comps == [{"A", "B", "C"}]


def test_share_oracle_values():
    assert 2.0 ** (66 - 42) == F["shares_42"]
    assert 2.0 ** (66 - 48) == F["shares_48"]


def test_avalanche_oracle_frozen():
    assert o.avalanche_bits(1000, 1) == pytest.approx(F["avalanche_mean_bits"], abs=1e-9)


@pytest.mark.slow
def test_nakamoto_monte_carlo_frozen():
    got = o.nakamoto_mc(0.1, 6, 10 ** 7, 20140101)
    assert got == F["nakamoto_mc_q01_z6"]
    assert math.isclose(got, F["nakamoto"][(0.1, 6)], rel_tol=0.1)
