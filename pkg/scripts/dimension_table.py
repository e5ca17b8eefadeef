"""Bowen root, box-counting slope and Poincare critical exponent side by side."""
import argparse
import math

import numpy as np

from ratsemigroup.catalog import get_example
from ratsemigroup.julia import approximate_julia, box_count_dimension
from ratsemigroup.pressure import bowen_root, critical_exponent_estimate
from ratsemigroup.words import build_preimage_tree

CASES = {"cantor3": (0.5, math.log(2) / math.log(3)), "cantor3x3": (0.5, 1.0), "pm2": (1 + 1j, None)}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=10)
    ap.add_argument("--points", type=int, default=1_000_000)
    args = ap.parse_args()
    print(f"{'example':<10} {'exact':>8} {'bowen':>9} {'n-1':>9} {'boxcount':>9} {'r2':>7} {'poincare':>9}")
    for name, (z, exact) in CASES.items():
        f = get_example(name).multimap
        n = args.n if f.total_degree <= 4 else min(args.n, 8)
        tree = build_preimage_tree(f, z, n + 1)
        h = bowen_root(f, z, n, tree=tree).h
        h_prev = bowen_root(f, z, n - 1, tree=tree).h
        fit = box_count_dimension(approximate_julia(f, "chaos_game", length=args.points, seed=0))
        crit = critical_exponent_estimate(f, z, np.linspace(0, 2, 201), n, tree=tree)
        ex = f"{exact:.5f}" if exact is not None else "-"
        print(f"{name:<10} {ex:>8} {h:9.5f} {h_prev:9.5f} {fit.slope:9.5f} {fit.r2:7.4f} {crit:9.2f}")


if __name__ == "__main__":
    main()
