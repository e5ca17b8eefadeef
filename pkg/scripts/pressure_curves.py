"""Write finite-n pressure curves as CSV rows (t, n, cesaro, ratio)."""
import argparse
import csv
import sys

import numpy as np

from ratsemigroup.catalog import get_example
from ratsemigroup.pressure import log_level_sum
from ratsemigroup.words import build_preimage_tree


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("example", nargs="?", default="pm2")
    ap.add_argument("--base", type=complex, default=1 + 1j)
    ap.add_argument("--n", type=int, nargs="+", default=[4, 6, 8, 10])
    ap.add_argument("--steps", type=int, default=41)
    args = ap.parse_args()
    f = get_example(args.example).multimap
    tree = build_preimage_tree(f, args.base, max(args.n) + 1)
    ts = np.linspace(0, 2, args.steps)
    w = csv.writer(sys.stdout, lineterminator="\r\n")
    w.writerow(["t", "n", "cesaro", "ratio"])
    for n in args.n:
        a = log_level_sum(tree, n, ts)
        b = log_level_sum(tree, n + 1, ts)
        for t, x, y in zip(ts, a / n, b - a):
            w.writerow([repr(float(t)), n, repr(float(x)), repr(float(y))])


if __name__ == "__main__":
    main()
