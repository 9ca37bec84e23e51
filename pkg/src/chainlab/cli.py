"""``chainlab`` command line: run, sweep, validate, presets."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .economics import PRESETS
from .scenario import (RuntimeAbort, ScenarioError, parse_scenario, parse_value, run,
                       sweep)

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 2, 3


def default_out(name: str) -> Path:
    return Path(os.environ.get("CHAINLAB_OUT", "chainlab_out")) / name


def _load(args):
    try:
        return parse_scenario(args.file, args.override)
    except FileNotFoundError:
        print(f"error: no such scenario {args.file}", file=sys.stderr)
    except ScenarioError as exc:
        for e in exc.errors:
            print(f"error: {e}", file=sys.stderr)
    return None


def cmd_validate(args) -> int:
    sc = _load(args)
    if sc is None:
        return EXIT_VALIDATION
    print(f"{sc.name}: ok ({len(sc.coins)} coins, {sum(m.count for m in sc.miners)} miners, "
          f"{len(sc.attacks)} attacks)")
    return EXIT_OK


def cmd_run(args) -> int:
    sc = _load(args)
    if sc is None:
        return EXIT_VALIDATION
    out = Path(args.out) if args.out else default_out(sc.name)
    try:
        summary = run(sc, out)
    except RuntimeAbort as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(json.dumps(summary.to_json(), indent=2, sort_keys=True))
    print(f"wrote {out}", file=sys.stderr)
    return EXIT_OK


def cmd_sweep(args) -> int:
    sc = _load(args)
    if sc is None:
        return EXIT_VALIDATION
    values = [parse_value(v.strip()) for v in args.values.split(",") if v.strip()]
    out = Path(args.out) if args.out else default_out(f"{sc.name}_sweep")
    try:
        results = sweep(sc, args.param, values, out, jobs=args.jobs)
    except ScenarioError as exc:
        for e in exc.errors:
            print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except RuntimeAbort as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"{len(results)} runs; aggregate at {out / 'aggregate.csv'}")
    return EXIT_OK


def cmd_presets(args) -> int:
    for label, spec in PRESETS.items():
        cap = "none" if spec.max_supply is None else f"{spec.max_supply:g}"
        print(f"{label}: family={spec.hash_family} block_time={spec.block_time_target:g}s "
              f"retarget={spec.retarget_interval} cap={cap}")
        for h, r in spec.reward_schedule:
            print(f"  from height {h:>9,}: {r:g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="chainlab", description="Proof-of-work blockchain simulator")
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp, with_out=True):
        sp.add_argument("file", help="scenario file, or the name of a bundled scenario")
        sp.add_argument("--override", action="append", default=[], metavar="K=V",
                        help="dotted path = TOML value, repeatable")
        if with_out:
            sp.add_argument("--out", help="output directory (default $CHAINLAB_OUT/<name>)")

    r = sub.add_parser("run", help="run one scenario")
    common(r)
    r.set_defaults(func=cmd_run)
    s = sub.add_parser("sweep", help="one run per parameter value")
    common(s)
    s.add_argument("--param", required=True, help="dotted path, e.g. attacks.0.attack_hash")
    s.add_argument("--values", required=True, help="comma separated TOML values")
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_sweep)
    v = sub.add_parser("validate", help="check a scenario without running it")
    common(v, with_out=False)
    v.set_defaults(func=cmd_validate)
    pr = sub.add_parser("presets", help="list built-in coins")
    pr.set_defaults(func=cmd_presets)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
