"""Pick the Janson constant C on calibration seeds and record it with the implied m.

For each C on a grid, m(C) is the least m satisfying the Janson inequality at
(N, p, r).  The recorded C is the smallest grid value whose m(C) yields a
transversal blue clique with a one-sided 95% Wilson lower bound of at least
``target`` on the calibration seeds, so a point estimate that only just clears
the target is not accepted.  Acceptance runs on a disjoint seed range.
"""

import argparse
import json
import math
import sys

from treeramsey.ramsey import janson_condition, janson_trial


def wilson_lower(hits, trials, z=1.645):
    if trials == 0:
        return 0.0
    ph = hits / trials
    centre = ph + z * z / (2 * trials)
    spread = z * math.sqrt(ph * (1 - ph) / trials + z * z / (4 * trials * trials))
    return (centre - spread) / (1 + z * z / trials)


def least_m(N, p, r, C):
    for m in range(1, N // (r + 1) + 1):
        if janson_condition(N, p, m, r, C).holds:
            return m
    return None


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, default=300)
    ap.add_argument("--p", type=float, default=0.3)
    ap.add_argument("--r", type=int, default=2)
    ap.add_argument("--seeds", type=int, nargs=2, default=(1000, 1200), metavar=("START", "STOP"))
    ap.add_argument("--target", type=float, default=0.95)
    ap.add_argument("--grid", type=float, nargs="+", default=[0.02, 0.05, 0.1, 0.15, 0.2, 0.25, 0.5, 1.0, 2.0])
    ap.add_argument("--out", default="configs/janson.json")
    a = ap.parse_args(argv)

    seeds = range(*a.seeds)
    rate_of_m = {}
    chosen = None
    for C in sorted(a.grid):
        m = least_m(a.N, a.p, a.r, C)
        if m is None:
            continue
        if m not in rate_of_m:
            hits = sum(janson_trial(a.N, a.p, m, a.r, s) is not None for s in seeds)
            rate_of_m[m] = (hits / len(seeds), wilson_lower(hits, len(seeds)))
        rate, lower = rate_of_m[m]
        print(f"C={C} m={m} rate={rate:.3f} lower={lower:.3f}", file=sys.stderr)
        if lower >= a.target:
            chosen = (C, m)
            break
    if chosen is None:
        print("no grid value reaches the target", file=sys.stderr)
        return 1
    C, m = chosen
    cfg = {"N": a.N, "p": a.p, "r": a.r, "C": C, "m": m, "calibration_seeds": list(a.seeds),
           "calibration_rate": rate_of_m[m][0], "calibration_lower_bound": round(rate_of_m[m][1], 4),
           "acceptance_seeds": [0, 200]}
    with open(a.out, "w") as fh:
        fh.write(json.dumps(cfg, indent=1) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
