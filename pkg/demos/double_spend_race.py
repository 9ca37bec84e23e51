"""Simulated double-spend races against the two catch-up formulas.

The closed form treats the attacker's progress while the merchant waits as
Poisson.  The exact odds count it as a negative binomial and include the
block the attacker mines before paying.  The simulated race follows the
second one.
"""

import sys

from chainlab.attacks import DoubleSpendScenario, RaceSetup, catch_up_probability, catch_up_probability_exact

if __name__ == "__main__":
    seeds = int(sys.argv[1]) if len(sys.argv) > 1 else 300
    print(f"{'q':>5} {'z':>3} {'simulated':>10} {'exact':>8} {'closed':>8}")
    for q in (0.1, 0.3, 0.45):
        for z in (1, 2, 6):
            sc = DoubleSpendScenario(RaceSetup(q=q, z_wait=z, deadline=600.0 * 1000, give_up_deficit=60))
            rate = sum(sc.run(s).success for s in range(seeds)) / seeds
            print(f"{q:>5} {z:>3} {rate:>10.3f} {catch_up_probability_exact(q, z):>8.3f} "
                  f"{catch_up_probability(q, z):>8.3f}")
