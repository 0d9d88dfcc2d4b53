"""Walk through one interval-intersection selection by hand.

Five estimators are ordered from least to most biased, with confidence
widths halving at every step. The script prints each interval, the running
intersection, and where it first becomes empty.

    python3 demos/selection_walkthrough.py
"""
from slope_ope import EstimatorBundle, build_intervals, kappa_of, select

estimates = [1.0, 0.8, 1.25, 0.525, 0.1625]
cnf = [0.5, 0.25, 0.125, 0.0625, 0.03125]

bundle = EstimatorBundle(estimates, cnf)
result = select(bundle)

print("index  estimate  interval          running intersection")
lo, hi = float("-inf"), float("inf")
for i, iv in enumerate(build_intervals(bundle)):
    lo, hi = max(lo, iv.lo), min(hi, iv.hi)
    running = f"[{lo:.4f}, {hi:.4f}]" if lo <= hi else "empty"
    print(f"{i:5d}  {estimates[i]:8.4f}  [{iv.lo:.4f}, {iv.hi:.4f}]  {running}")

print(f"\nkappa = {kappa_of(cnf):.3f}")
print(f"chosen index {result.chosen_index} with estimate {result.chosen_estimate}")
