"""Bandwidth selection on a continuous-action bandit as the sample grows.

A trained linear+sigmoid target policy is evaluated from uniformly logged
data with a boxcar kernel. Two fixed bandwidths compete with the adaptive
choice; the table shows MSE per sample size and how often each bandwidth
was picked.

    python3 demos/bandit_crossover.py [--replicates 30]
"""
import argparse
from collections import Counter, defaultdict

import numpy as np

from slope_ope.harness import ExperimentConfig, run


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--replicates", type=int, default=30)
    args = parser.parse_args()

    cfg = ExperimentConfig.from_dict({
        "domain": "cb",
        "replicates": args.replicates,
        "record_wall_time": False,
        "settings": {"bandwidths": [1 / 32, 1 / 4], "mc_samples": 200_000},
        "fixed": {"reward_kind": "absolute_value", "lipschitz": 3.0, "kernel": "boxcar",
                  "target": "linear", "logging": "uniform"},
        "grid": {"n": [10, 100, 1000, 10_000, 100_000]},
    })
    records = run(cfg)
    sq = defaultdict(list)
    picks = defaultdict(Counter)
    for r in records:
        n = int(r.condition_id.rsplit("n=", 1)[1].split("/")[0])
        sq[n, r.method].append(r.sq_error)
        if r.method == "slope":
            picks[n][r.chosen_param] += 1

    methods = ["slope", "fixed_h(0.25)", "fixed_h(0.03125)"]
    print(f"{'n':>7} " + " ".join(f"{m:>17}" for m in methods) + "   picks")
    for n in sorted(picks):
        row = " ".join(f"{np.mean(sq[n, m]):17.2e}" for m in methods)
        print(f"{n:7d} {row}   {dict(picks[n])}")


if __name__ == "__main__":
    main()
