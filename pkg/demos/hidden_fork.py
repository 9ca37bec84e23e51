"""A pool manager secretly points members at a private fork.

When members only see the header hash they cannot tell the difference, and
their work traces are identical to an honest pool's.  Chaining the previous
hash into the proof of work lets members check what they are mining on.
"""

from chainlab.attacks import hidden_fork_attack, hidden_fork_world
from chainlab.world import DefenseConfig

if __name__ == "__main__":
    same = 0
    for seed in range(10):
        w, plan, pool = hidden_fork_world(seed, 0.45, 2, strategy="honest")
        honest = hidden_fork_attack(w, pool, plan, horizon=3 * 3600.0).traces
        w, plan, pool = hidden_fork_world(seed, 0.45, 2)
        hidden = hidden_fork_attack(w, pool, plan, horizon=3 * 3600.0).traces
        same += honest == hidden
    print(f"member traces identical to an honest pool: {same}/10")
    for variant in ("baseline", "plaintext_aware"):
        wins = caught = 0
        for seed in range(10):
            w, plan, pool = hidden_fork_world(seed, 0.45, 2, defense=DefenseConfig.variant(variant))
            res = hidden_fork_attack(w, pool, plan)
            wins += res.outcome.success
            caught += res.detections > 0
        print(f"{variant:>16}: attack succeeded {wins}/10, members detected it {caught}/10")
