"""Two coins share one hash market; the small one halves its reward.

Profit-seeking miners leave until revenue per hash is equal again, so the
small coin's hash rate settles at half its pre-halving level.
"""

from chainlab.experiments import run_halving

if __name__ == "__main__":
    for seed in range(5):
        res = run_halving(seed)
        print(f"seed {seed}: hash before {res.before:7.2f}  after {res.after:7.2f}  ratio {res.ratio:.3f}")
    res = run_halving(0, single_coin=True)
    print(f"no second coin to move to: ratio {res.ratio:.3f}")
