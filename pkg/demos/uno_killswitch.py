"""Unobtanium's final reward drop is a factor of 312.5, not 2.

Runs the bundled scenario and prints the coin's hash rate around the drop.
"""

import csv
import tempfile
from pathlib import Path

from chainlab.economics import schedule_drop_factor
from chainlab.scenario import parse_scenario, run

if __name__ == "__main__":
    sc = parse_scenario("uno_killswitch")
    drop = sc.coins[0].schedule[-1][0]
    print(f"final drop factor {schedule_drop_factor(sc.coins[0].spec(), -1)} at height {drop}")
    with tempfile.TemporaryDirectory() as tmp:
        run(sc, tmp)
        with open(Path(tmp) / "metrics_UNO.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
    step = max(1, len(rows) // 20)
    for r in rows[::step] + rows[-1:]:
        print(f"t={float(r['time_s']):>9.0f}s  height {r['height']:>7}  hash {float(r['hash_rate']):10.4f}")
