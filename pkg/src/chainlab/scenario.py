"""Scenario files: parse, validate, serialize and run.

A scenario is a TOML document.  Top-level keys are ``name``, ``master_seed``,
``duration`` (simulated seconds), ``defenses`` (a variant name),
``metrics_interval`` and ``check_txs``; tables are ``[network]``,
``[[coins]]``, ``[[miners]]``, ``[[pools]]``, ``[[markets]]`` and
``[[attacks]]``.  The grammar is documented in ``docs/scenario_format.md``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .attacks import (AttackOutcome, DoubleSpendAttack, DoubleSpendPlan, displace_hash,
                      make_payment_pair, pool_node)
from .chain import fork_statistics
from .economics import PRESETS, CoinSpec, HashMarket, PriceModel, UnknownPreset, preset, reward_at
from .mining import MANAGER_STRATEGIES, WORK_PROTOCOLS, MinerActor, PoolActor
from .network import LatencyModel
from .world import DefenseConfig, World

SCHEMA_VERSION = 1
METRICS_HEADER = ("time_s", "hash_rate", "difficulty", "height", "fork_rate_window", "price",
                  "profitability_mean")
ATTACK_KINDS = ("double_spend", "hidden_fork", "displacement")
BUNDLED = Path(__file__).parent / "scenarios"


class ScenarioError(ValueError):
    """Base for validation failures; ``errors`` lists every problem found."""

    def __init__(self, errors: list[str]) -> None:
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class ParseError(ScenarioError):
    pass


class DanglingReference(ScenarioError):
    pass


class UnknownPresetError(ScenarioError, UnknownPreset):
    pass


class RuntimeAbort(RuntimeError):
    pass


# --------------------------------------------------------------------------
# declarations


@dataclass
class NetworkDecl:
    model: str = "fixed"
    a: float = 0.0
    b: float = 0.0
    nodes: int = 1


@dataclass
class CoinDecl:
    label: str
    preset: str | None = None
    hash_family: str | None = None
    block_time: float | None = None
    retarget_interval: int | None = None
    schedule: list[list[float]] | None = None
    max_supply: float | None = None
    merged_mining_parent: str | None = None
    price: float = 1.0
    price_times: list[float] | None = None
    price_values: list[float] | None = None
    difficulty: float | None = None
    mean_fees: float = 0.0

    def spec(self) -> CoinSpec:
        base = preset(self.preset) if self.preset else None
        sched = (tuple((int(h), float(r)) for h, r in self.schedule) if self.schedule is not None
                 else base.reward_schedule if base else None)
        if sched is None:
            raise ValueError(f"coin {self.label}: needs a preset or a schedule")

        def pick(mine, theirs, default=None):
            return mine if mine is not None else (theirs if base else default)

        return CoinSpec(
            self.label,
            pick(self.hash_family, base and base.hash_family, "sha256d"),
            float(pick(self.block_time, base and base.block_time_target, 600.0)),
            int(pick(self.retarget_interval, base and base.retarget_interval, 2016)),
            sched,
            pick(self.max_supply, base and base.max_supply),
            pick(self.merged_mining_parent, base and base.merged_mining_parent),
        )

    def price_model(self) -> PriceModel:
        if self.price_times is not None:
            return PriceModel(self.label, "exogenous_series",
                              {"times": list(self.price_times), "prices": list(self.price_values or [])})
        return PriceModel(self.label, "fixed", {"price": float(self.price)})


@dataclass
class MinerDecl:
    """``count > 1`` expands into ids ``<id>0 .. <id>{count-1}``."""

    id: str
    hash_rate: float
    coin: str | None = None
    node: str = "n0"
    count: int = 1
    pool: str | None = None
    electricity_cost: float = 0.0
    responsive: bool = True
    accept_bribes: bool = False
    protocol_awareness: str = "full_header"

    def ids(self) -> list[str]:
        return [self.id] if self.count == 1 else [f"{self.id}{i}" for i in range(self.count)]


@dataclass
class PoolDecl:
    id: str
    strategy: str = "honest"
    protocol: str = "stratum_like"
    refresh_interval: float = 30.0
    share_zeros: int = 32


@dataclass
class MarketDecl:
    family: str
    responsiveness: float = 0.2
    tick_interval: float = 600.0
    rental_pool: float = 0.0


@dataclass
class AttackDecl:
    kind: str
    id: str = "attacker"
    coin: str | None = None
    at: float = 0.0
    attack_hash: float = 0.0
    z_wait: int = 6
    amount: float = 100.0
    deadline: float | None = None
    budget: float | None = None
    premium: float | None = None
    give_up_deficit: int | None = None
    pool: str | None = None
    lure_coin: str | None = None
    window: float | None = None


@dataclass
class Scenario:
    name: str
    master_seed: int
    duration: float
    coins: list[CoinDecl] = field(default_factory=list)
    miners: list[MinerDecl] = field(default_factory=list)
    pools: list[PoolDecl] = field(default_factory=list)
    network: NetworkDecl = field(default_factory=NetworkDecl)
    markets: list[MarketDecl] = field(default_factory=list)
    attacks: list[AttackDecl] = field(default_factory=list)
    defenses: str = "baseline"
    metrics_interval: float = 600.0
    check_txs: bool = True

    def node_ids(self) -> list[str]:
        return [f"n{i}" for i in range(self.network.nodes)]

    def coin_labels(self) -> list[str]:
        return [c.label for c in self.coins]


_TABLES = {"coins": CoinDecl, "miners": MinerDecl, "pools": PoolDecl, "markets": MarketDecl,
           "attacks": AttackDecl}


# --------------------------------------------------------------------------
# parsing and validation


def _build(cls, raw, where: str, errors: list[str]):
    if not isinstance(raw, dict):
        errors.append(f"{where}: expected a table")
        return None
    known = {f.name for f in fields(cls)}
    for k in raw:
        if k not in known:
            errors.append(f"{where}.{k}: unknown field")
    try:
        return cls(**{k: v for k, v in raw.items() if k in known})
    except TypeError as exc:
        missing = str(exc).split("argument")[-1].strip(": ")
        errors.append(f"{where}: missing required field {missing}")
        return None


def scenario_from_dict(doc: dict) -> Scenario:
    """Validated :class:`Scenario`; raises with every problem found."""
    errors: list[str] = []
    for key in ("name", "master_seed", "duration"):
        if key not in doc:
            errors.append(f"{key}: missing required field")
    known_top = {f.name for f in fields(Scenario)}
    for k in doc:
        if k not in known_top:
            errors.append(f"{k}: unknown field")
    parts = {}
    for key, cls in _TABLES.items():
        raw = doc.get(key, [])
        if not isinstance(raw, list):
            errors.append(f"{key}: expected an array of tables")
            raw = []
        parts[key] = [x for x in (_build(cls, r, f"{key}[{i}]", errors) for i, r in enumerate(raw))
                      if x is not None]
    net = _build(NetworkDecl, doc.get("network", {}), "network", errors) or NetworkDecl()
    sc = Scenario(doc.get("name", ""), doc.get("master_seed", 0), doc.get("duration", 1.0), network=net,
                  defenses=doc.get("defenses", "baseline"),
                  metrics_interval=doc.get("metrics_interval", 600.0),
                  check_txs=doc.get("check_txs", True), **parts)
    validate(sc, errors)
    return sc


def validate(sc: Scenario, errors: list[str] | None = None) -> None:
    """Raise one :class:`ScenarioError` subclass carrying every problem."""
    errors = list(errors or [])
    unknown_presets: list[str] = []
    dangling: list[str] = []
    if not isinstance(sc.master_seed, int) or not 0 <= sc.master_seed < 2 ** 64:
        errors.append("master_seed: must be an integer in [0, 2**64)")
    if not isinstance(sc.duration, (int, float)) or not sc.duration > 0:
        errors.append("duration: must be positive")
    if not sc.metrics_interval > 0:
        errors.append("metrics_interval: must be positive")
    if sc.defenses not in DefenseConfig.VARIANTS:
        errors.append(f"defenses: unknown variant {sc.defenses!r}")
    if sc.network.model not in ("fixed", "lognormal"):
        errors.append(f"network.model: unknown latency model {sc.network.model!r}")
    else:
        try:
            LatencyModel(sc.network.model, sc.network.a, sc.network.b)
        except ValueError as exc:
            errors.append(f"network: {exc}")
    if sc.network.nodes < 1:
        errors.append("network.nodes: at least one node")
    labels = sc.coin_labels()
    if len(set(labels)) != len(labels):
        errors.append("coins: duplicate labels")
    for i, c in enumerate(sc.coins):
        if c.preset is not None and c.preset not in PRESETS:
            unknown_presets.append(f"coins[{i}].preset: unknown preset {c.preset!r}")
            continue
        try:
            c.spec()
        except ValueError as exc:
            errors.append(f"coins[{i}]: {exc}")
        if c.merged_mining_parent is not None and c.merged_mining_parent not in labels:
            dangling.append(f"coins[{i}].merged_mining_parent: undeclared coin {c.merged_mining_parent!r}")
        if c.price_times is not None and len(c.price_times) != len(c.price_values or []):
            errors.append(f"coins[{i}]: price_times and price_values differ in length")
    nodes = set(sc.node_ids())
    pools = {p.id for p in sc.pools}
    miner_ids: list[str] = []
    for i, m in enumerate(sc.miners):
        where = f"miners[{i}]"
        if m.count < 1:
            errors.append(f"{where}.count: must be at least 1")
        if not m.hash_rate > 0:
            errors.append(f"{where}.hash_rate: must be positive")
        if m.coin is not None and m.coin not in labels:
            dangling.append(f"{where}.coin: undeclared coin {m.coin!r}")
        if m.node not in nodes:
            dangling.append(f"{where}.node: undeclared node {m.node!r}")
        if m.pool is not None and m.pool not in pools:
            dangling.append(f"{where}.pool: undeclared pool {m.pool!r}")
        miner_ids.extend(m.ids())
    if len(set(miner_ids)) != len(miner_ids):
        errors.append("miners: duplicate ids")
    for i, p in enumerate(sc.pools):
        if p.strategy not in MANAGER_STRATEGIES:
            errors.append(f"pools[{i}].strategy: unknown strategy {p.strategy!r}")
        if p.protocol not in WORK_PROTOCOLS:
            errors.append(f"pools[{i}].protocol: unknown protocol {p.protocol!r}")
    families = {c.spec().hash_family for c in sc.coins if c.preset is None or c.preset in PRESETS}
    for i, mk in enumerate(sc.markets):
        if mk.family not in families:
            dangling.append(f"markets[{i}].family: no coin of family {mk.family!r}")
    for i, a in enumerate(sc.attacks):
        where = f"attacks[{i}]"
        if a.kind not in ATTACK_KINDS:
            errors.append(f"{where}.kind: unknown attack kind {a.kind!r}")
        if a.coin is None:
            errors.append(f"{where}.coin: missing required field")
        elif a.coin not in labels:
            dangling.append(f"{where}.coin: undeclared coin {a.coin!r}")
        if a.kind == "hidden_fork" and a.pool not in pools:
            dangling.append(f"{where}.pool: undeclared pool {a.pool!r}")
        if a.kind == "displacement":
            if a.lure_coin is not None and a.lure_coin not in labels:
                dangling.append(f"{where}.lure_coin: undeclared coin {a.lure_coin!r}")
            if a.window is None or a.window < 0:
                errors.append(f"{where}.window: displacement needs a non-negative window")
            fam = next((c.spec().hash_family for c in sc.coins if c.label == a.coin), None)
            if fam is not None and fam not in {mk.family for mk in sc.markets}:
                errors.append(f"{where}: displacement needs a market for family {fam!r}")
        if a.kind in ("double_spend", "hidden_fork") and a.z_wait < 0:
            errors.append(f"{where}.z_wait: must be non-negative")
    if unknown_presets:
        raise UnknownPresetError(unknown_presets + errors + dangling)
    if dangling:
        raise DanglingReference(dangling + errors)
    if errors:
        raise ParseError(errors)


def _locate(path: str | Path) -> Path:
    p = Path(path)
    if p.exists():
        return p
    for cand in (BUNDLED / p.name, BUNDLED / f"{p.name}.toml", BUNDLED / f"{p.stem}.toml"):
        if cand.exists():
            return cand
    raise FileNotFoundError(path)


def load_document(path: str | Path) -> dict:
    p = _locate(path)
    try:
        return tomllib.loads(p.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ParseError([f"{p}: {exc}"]) from None


def parse_scenario(path: str | Path, overrides=()) -> Scenario:
    doc = load_document(path)
    for ov in overrides:
        apply_override(doc, ov)
    return scenario_from_dict(doc)


def parse_text(text: str) -> Scenario:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ParseError([str(exc)]) from None
    return scenario_from_dict(doc)


def _strip_none(obj):
    if isinstance(obj, dict):
        return {k: _strip_none(v) for k, v in obj.items() if v is not None}
    if isinstance(obj, list):
        return [_strip_none(v) for v in obj]
    return obj


def to_dict(sc: Scenario) -> dict:
    return _strip_none(asdict(sc))


def serialize(sc: Scenario) -> str:
    return tomli_w.dumps(to_dict(sc))


# --------------------------------------------------------------------------
# overrides: dotted path = TOML value, e.g. attacks.0.attack_hash=0.3


def parse_value(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_override(doc: dict, override: str) -> None:
    if "=" not in override:
        raise ParseError([f"override {override!r}: expected key=value"])
    path, text = override.split("=", 1)
    set_path(doc, path.strip(), parse_value(text.strip()))


def set_path(doc: dict, path: str, value) -> None:
    keys = path.split(".")
    cur = doc
    for i, k in enumerate(keys[:-1]):
        nxt = keys[i + 1]
        if isinstance(cur, list):
            try:
                cur = cur[int(k)]
            except (ValueError, IndexError):
                raise ParseError([f"override path {path!r}: bad index {k!r}"]) from None
        else:
            if k not in cur:
                cur[k] = [] if nxt.isdigit() else {}
            cur = cur[k]
    last = keys[-1]
    if isinstance(cur, list):
        try:
            cur[int(last)] = value
        except (ValueError, IndexError):
            raise ParseError([f"override path {path!r}: bad index {last!r}"]) from None
    else:
        cur[last] = value


# --------------------------------------------------------------------------
# building and running


@dataclass
class BuiltWorld:
    world: World
    attacks: list[tuple[AttackDecl, object]]
    markets: dict[str, HashMarket]


def build_world(sc: Scenario) -> BuiltWorld:
    net = sc.network
    latency = LatencyModel(net.model, net.a, net.b)
    w = World(sc.master_seed, latency=latency, defense=DefenseConfig.variant(sc.defenses),
              check_txs=sc.check_txs)
    allocs: dict[str, list] = {c.label: [] for c in sc.coins}
    for a in sc.attacks:
        if a.kind in ("double_spend", "hidden_fork"):
            allocs[a.coin].append((a.id, a.amount))
    for c in sc.coins:
        w.add_coin(c.spec(), c.difficulty, allocations=allocs[c.label], price=c.price_model(),
                   mean_fees=c.mean_fees)
    for nid in sc.node_ids():
        w.add_node(nid)
    markets = {mk.family: HashMarket(mk.family, migration_responsiveness=mk.responsiveness,
                                     tick_interval=mk.tick_interval, rental_pool=mk.rental_pool)
               for mk in sc.markets}
    members: dict[str, list[str]] = {p.id: [] for p in sc.pools}
    for m in sc.miners:
        fam = next((c.spec().hash_family for c in sc.coins if c.label == m.coin), None)
        for mid in m.ids():
            actor = w.add_miner(MinerActor(mid, float(m.hash_rate), m.coin, m.electricity_cost,
                                           node=m.node, responsive=m.responsive,
                                           accept_bribes=m.accept_bribes,
                                           protocol_awareness=m.protocol_awareness))
            if m.pool is not None:
                members[m.pool].append(mid)
            if fam in markets:
                markets[fam].participants[mid] = actor
    traced = {a.pool for a in sc.attacks if a.kind == "hidden_fork"}
    for p in sc.pools:
        pool = PoolActor(p.id, members[p.id], p.strategy, p.protocol, p.share_zeros, p.refresh_interval)
        pool.trace = p.id in traced
        w.add_pool(pool)
    for mk in markets.values():
        w.add_market(mk)
    attacks = []
    for a in sc.attacks:
        attacks.append((a, _install_attack(w, sc, a, markets)))
    return BuiltWorld(w, attacks, markets)


def _install_attack(w: World, sc: Scenario, a: AttackDecl, markets: dict[str, HashMarket]):
    state = w.coins[a.coin]
    if a.kind == "displacement":
        market = markets[state.spec.hash_family]
        prem = 0.1 if a.premium is None else a.premium
        return ("displacement", market, prem, (a.at, a.at + a.window))
    alloc = next(t for t in state.genesis.txs if t.outputs[0].recipient == a.id)
    pay, back = make_payment_pair(alloc.out(0), a.amount, a.id, f"merchant:{a.id}")
    rental = 0.0
    if a.premium is not None:
        d = (state.difficulty.expected_hashes_per_block if state.difficulty is not None
             else max(w.effective_hash_rate(a.coin), 1.0) * state.spec.block_time_target)
        rental = (1 + a.premium) * reward_at(state.spec, 1) * state.price.price(0.0) / d
    budget = math.inf if a.budget is None else a.budget
    plan = DoubleSpendPlan(a.coin, pay, back, a.z_wait, a.attack_hash, deadline=a.deadline, budget=budget,
                           rental_price=rental, give_up_deficit=a.give_up_deficit, victim_node="n0")
    if a.kind == "hidden_fork":
        pool = w.pools[a.pool]
        attack = DoubleSpendAttack(w, plan, attacker_id=a.id, node_id=pool_node(w, pool))
        attack.extra_hash = list(pool.members)
        w.pool_templates[pool.id] = attack.pool_template
    else:
        attack = DoubleSpendAttack(w, plan, attacker_id=a.id)
    return attack


@dataclass
class RunSummary:
    scenario: str
    seed: int
    files: dict[str, str]
    attacks: list[dict]
    fork_stats: dict[str, dict]
    final_supply: dict[str, float]
    conservation: dict[str, dict]
    runtime_s: float = 0.0

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION, "scenario": self.scenario, "seed": self.seed,
            "files": self.files, "attacks": self.attacks, "fork_stats": self.fork_stats,
            "final_supply": self.final_supply, "conservation": self.conservation,
        }


def conservation_report(world: World, outcomes: list[AttackOutcome]) -> dict[str, dict]:
    """Supply, double-spend and accounting checks on every node's main chain."""
    out = {}
    for label, state in world.coins.items():
        supply_ok, no_double, minted, expected = True, True, 0.0, 0.0
        for node in world.nodes.values():
            chain = node.tree(label).main_chain()
            got = math.fsum(b.txs[0].outputs[0].amount - math.fsum(t.fee for t in b.txs[1:])
                            for b in chain[1:])
            want = math.fsum(reward_at(state.spec, b.height) for b in chain[1:])
            supply_ok &= math.isclose(got, want, rel_tol=1e-9, abs_tol=1e-9)
            seen = set()
            for b in chain:
                for tx in b.txs:
                    for op in tx.outpoints():
                        if op in seen:
                            no_double = False
                        seen.add(op)
            if node is world.reference_node():
                minted, expected = got, want
        out[label] = {"minted": minted, "expected": expected, "supply_matches": supply_ok,
                      "no_double_spend_on_main": no_double}
    nets = all(math.isclose(o.net, o.revenue - o.spent) for o in outcomes)
    out["_attacks"] = {"net_equals_revenue_minus_spent": nets}
    return out


def _fmt(x: float) -> str:
    return repr(float(x))


def write_metrics(world: World, out: Path) -> dict[str, str]:
    files = {}
    for label, rows in world.metrics.items():
        path = out / f"metrics_{label}.csv"
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(METRICS_HEADER)
        for r in rows:
            wr.writerow([_fmt(r[0]), _fmt(r[1]), _fmt(r[2]), int(r[3]), _fmt(r[4]), _fmt(r[5]), _fmt(r[6])])
        path.write_text(buf.getvalue())
        files[f"metrics_{label}"] = path.name
        bpath = out / f"blocks_{label}.jsonl"
        with open(bpath, "w") as fh:
            world.reference_node().tree(label).write_records(fh)
        files[f"blocks_{label}"] = bpath.name
    return files


def run(sc: Scenario, out_dir: str | Path, overrides=()) -> RunSummary:
    """Run a scenario and write its outputs under ``out_dir``."""
    import time

    if overrides:
        doc = to_dict(sc)
        for ov in overrides:
            apply_override(doc, ov)
        sc = scenario_from_dict(doc)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    built = build_world(sc)
    w = built.world
    try:
        w.start(metrics_interval=sc.metrics_interval)
        for decl, obj in built.attacks:
            if decl.kind == "displacement":
                _, market, prem, window = obj
                displace_hash(market, prem, window, decl.coin, decl.lure_coin, w)
            else:
                obj.start(decl.at)
        w.run_until(sc.duration)
    except Exception as exc:  # noqa: BLE001 - any failure inside the run is a runtime abort
        raise RuntimeAbort(f"{type(exc).__name__}: {exc}") from exc
    outcomes = []
    records = []
    for decl, obj in built.attacks:
        if decl.kind == "displacement":
            records.append({"id": decl.id, "kind": decl.kind})
            continue
        obj.finish("horizon")
        o = obj.outcome()
        if decl.kind == "hidden_fork":
            o.detected = bool(w.detections)
        outcomes.append(o)
        records.append({"id": decl.id, "kind": decl.kind, **o.to_dict()})
    files = write_metrics(w, out)
    ref = w.reference_node()
    forks = {}
    for label in w.coins:
        st = fork_statistics(ref.tree(label))
        forks[label] = {"fork_rate": st.fork_rate, "n_blocks": st.n_blocks,
                        "depth_histogram": {str(k): v for k, v in st.depth_histogram.items()},
                        "low_confidence": st.low_confidence}
    supply = {label: math.fsum(b.reward for b in ref.tree(label).main_chain()) for label in w.coins}
    summary = RunSummary(sc.name, sc.master_seed, files, records, forks, supply,
                         conservation_report(w, outcomes), time.perf_counter() - t0)
    (out / "summary.json").write_text(json.dumps(summary.to_json(), indent=2, sort_keys=True) + "\n")
    (out / "timing.json").write_text(json.dumps({"runtime_s": summary.runtime_s}) + "\n")
    summary.files["summary"] = "summary.json"
    return summary


def _sweep_one(args):
    sc, out, param, value, index = args
    doc = to_dict(sc)
    set_path(doc, param, value)
    doc["master_seed"] = sc.master_seed + index
    return run(scenario_from_dict(doc), out)


def sweep(sc: Scenario, param: str, values: list, out_dir: str | Path, jobs: int = 1) -> list[RunSummary]:
    """One run per value, seeded ``master_seed + index``; writes ``aggregate.csv``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    # validate every value up front so a bad path fails before any run
    for v in values:
        doc = to_dict(sc)
        set_path(doc, param, v)
        scenario_from_dict(doc)
    tasks = [(sc, out / f"run_{i:03d}", param, v, i) for i, v in enumerate(values)]
    if jobs > 1 and len(tasks) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_sweep_one, tasks))
    else:
        results = [_sweep_one(t) for t in tasks]
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["index", "param", "value", "seed", "coin", "final_height", "fork_rate",
                 "final_supply", "attack_success", "attack_net"])
    for i, (v, s) in enumerate(zip(values, results)):
        succ = [a["success"] for a in s.attacks if "success" in a]
        net = [a["net"] for a in s.attacks if "net" in a]
        for label, fs in s.fork_stats.items():
            wr.writerow([i, param, v, s.seed, label, fs["n_blocks"], _fmt(fs["fork_rate"]),
                         _fmt(s.final_supply[label]), int(any(succ)) if succ else "",
                         _fmt(sum(net)) if net else ""])
    (out / "aggregate.csv").write_text(buf.getvalue())
    return results


def bundled_scenarios() -> list[Path]:
    return sorted(BUNDLED.glob("*.toml"))
