"""Run a Monte Carlo sweep from a JSON config and print the non-arrow frequency per N."""

import argparse
import csv
import sys

from treeramsey.ramsey import SweepConfig, mc_sweep, non_arrow_frequency, rows_to_csv


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("config")
    ap.add_argument("--out", default="sweep.csv")
    ap.add_argument("--strategy", default="extremal")
    a = ap.parse_args(argv)

    cfg = SweepConfig.load(a.config)
    rows = mc_sweep(cfg)
    with open(a.out, "w") as fh:
        fh.write(rows_to_csv(rows))
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["N", "freq", "se", "count"])
    for N, (f, se, k) in non_arrow_frequency(rows, a.strategy).items():
        w.writerow([N, f"{f:.3f}", f"{se:.3f}", k])
    return 0


if __name__ == "__main__":
    sys.exit(main())
