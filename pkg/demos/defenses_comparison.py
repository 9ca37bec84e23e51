"""Rented-hash attack on a small coin under each defense variant.

Blocks are worth 120 USD and the attacker has 600 USD to spend.
"""

from chainlab.attacks import DoubleSpendScenario, dogecoin_attack_setup
from chainlab.defenses import evaluate_defense
from chainlab.world import DefenseConfig

if __name__ == "__main__":
    sc = DoubleSpendScenario(dogecoin_attack_setup())
    for variant in DefenseConfig.VARIANTS:
        s = evaluate_defense(sc, variant, range(200)).summary()
        acc = s["acceptance_median_s"]
        print(f"{variant:>16}: success {s['success_rate']:.3f}  detections {s['detections']:>3}  "
              f"median acceptance {'-' if acc is None else f'{acc:.0f}s'}")
