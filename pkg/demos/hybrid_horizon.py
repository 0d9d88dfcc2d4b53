"""False-horizon selection on the aliased-then-observed chain.

The first two steps share one observation, so the tabular model is wrong
there; after that the model is exact. Importance weighting is needed only
for the aliased prefix. The script prints, per sample size, the MSE of each
estimator and the distribution of chosen horizons.

    python3 demos/hybrid_horizon.py [--replicates 64]
"""
import argparse
from collections import Counter, defaultdict

import numpy as np

from slope_ope.harness import ExperimentConfig, run


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--replicates", type=int, default=64)
    parser.add_argument("--fail-reward-step", type=int, default=1, choices=[1, 2])
    args = parser.parse_args()

    cfg = ExperimentConfig.from_dict({
        "domain": "rl",
        "replicates": args.replicates,
        "record_wall_time": False,
        "settings": {"fail_reward_step": args.fail_reward_step},
        "grid": {"env": ["hybrid"], "n": [50, 200, 500, 2000, 10_000]},
    })
    records = run(cfg, workers=1)
    sq = defaultdict(list)
    etas = defaultdict(Counter)
    for r in records:
        n = int(r.condition_id.split("n=")[1].split("/")[0])
        sq[n, r.method].append(r.sq_error)
        if r.method == "slope":
            etas[n][int(r.chosen_param)] += 1

    methods = ["slope", "dm", "wdr", "ips"]
    print(f"{'n':>6} " + " ".join(f"{m:>10}" for m in methods) + "   chosen horizons")
    for n in sorted(etas):
        row = " ".join(f"{np.mean(sq[n, m]):10.3g}" for m in methods)
        print(f"{n:6d} {row}   {dict(sorted(etas[n].items()))}")


if __name__ == "__main__":
    main()
