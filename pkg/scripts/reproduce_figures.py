"""Render the two Julia-set pictures: the pair z^2+2, z^2-2 and the pair of
second iterates of z^2-1 and z^2/4."""
import argparse
from pathlib import Path

from ratsemigroup.catalog import get_example
from ratsemigroup.julia import Viewport, approximate_julia, rasterize

FIGURES = {
    "pm2": Viewport.square(0, 2.2, 800),
    "fig2": Viewport.square(0, 4.4, 800),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("figures"))
    ap.add_argument("--points", type=int, default=2_000_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    for name, vp in FIGURES.items():
        f = get_example(name).multimap
        cloud = approximate_julia(f, "chaos_game", length=args.points, seed=args.seed)
        img = rasterize(cloud, vp)
        path = args.out / f"{name}.png"
        img.write_png(path)
        print(f"{name}: {len(cloud)} points, max |z| = {abs(cloud.points).max():.4f}, "
              f"{(img.counts > 0).sum()} lit pixels -> {path}")


if __name__ == "__main__":
    main()
