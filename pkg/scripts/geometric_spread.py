"""Spread of m(B(z,r)) / r^h on the Cantor measure as the radius window widens.

With a wrong exponent h + delta every ratio picks up a factor r^(-delta), so
over a window [r_min, r_max] the spread can change by at most
(r_max / r_min)^delta relative to the matched exponent.
"""
import argparse
import math

import numpy as np

from ratsemigroup.catalog import get_example
from ratsemigroup.julia import approximate_julia
from ratsemigroup.measure import build_conformal_atoms, geometric_ratio_report, project_measure

H = math.log(2) / math.log(3)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--delta", type=float, default=0.2)
    ap.add_argument("--depth", type=int, default=12)
    args = ap.parse_args()
    f = get_example("cantor3").multimap
    m = project_measure(build_conformal_atoms(f, 0.5, H, 0.05, args.depth))
    cloud = approximate_julia(f, "full_tree", depth=args.depth)
    centers = cloud.points[np.random.default_rng(0).choice(len(cloud), 50, replace=False)]
    print(f"{'r_min':>8} {'r_max':>6} {'matched':>9} {'h+delta':>9} {'factor':>7} {'bound':>7}")
    for r_min in (1e-1 / 3, 1e-2, 1e-3, 1e-4):
        radii = np.geomspace(r_min, 1e-1, 9)
        a = geometric_ratio_report(m, H, centers, radii).spread
        b = geometric_ratio_report(m, H + args.delta, centers, radii).spread
        bound = (1e-1 / r_min) ** args.delta
        print(f"{r_min:8.1e} {1e-1:6.1g} {a:9.3f} {b:9.3f} {b / a:7.3f} {bound:7.3f}")


if __name__ == "__main__":
    main()
