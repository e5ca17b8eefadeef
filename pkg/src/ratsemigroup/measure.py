"""Atomic approximations of conformal measures on the skew-product Julia set.

The measure puts mass  exp(-s n) |f_w'(x)|^(-t) / S  on every pair (w, x)
with |w| = n <= N and f_w(x) = xi, where S normalises the truncated sum.
Masses are stored level by level, aligned with the nodes of the preimage
tree they come from, so the pullback operator can be applied exactly.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import InfiniteSum, SeriesNotDecaying
from .pressure import log_level_sum
from .words import MultiMap, PreimageTree, PruningPolicy, build_preimage_tree


@dataclass
class AtomicMeasure:
    tree: PreimageTree
    masses: list            # masses[n] aligned with tree.levels[n]; masses[0] is empty
    t: float
    s: float
    N: int
    xi: complex
    log_norm: float         # log of the truncated normaliser S
    level_log_sums: list    # log L^n 1(xi), n = 0..N+1
    flags: list = field(default_factory=list)

    @property
    def level_masses(self) -> list:
        return [float(np.sum(self.masses[n])) for n in range(1, self.N + 1)]

    @property
    def total_mass(self) -> float:
        return math.fsum(float(m) for n in range(1, self.N + 1) for m in self.masses[n])

    @property
    def tail_mass(self) -> float:
        """Mass the untruncated series would put on level N+1."""
        return float(np.exp(-self.s * (self.N + 1) + self.level_log_sums[self.N + 1] - self.log_norm))

    def atoms(self):
        """Flattened (level, index, point, mass) arrays over levels 1..N."""
        lv, idx, pts, ms = [], [], [], []
        for n in range(1, self.N + 1):
            m = self.masses[n]
            keep = np.nonzero(m > 0)[0]
            lv.append(np.full(keep.size, n))
            idx.append(keep)
            pts.append(self.tree.levels[n].points[keep])
            ms.append(m[keep])
        return np.concatenate(lv), np.concatenate(idx), np.concatenate(pts), np.concatenate(ms)

    def __len__(self):
        return int(sum(np.count_nonzero(self.masses[n]) for n in range(1, self.N + 1)))

    def write_csv(self, fh):
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(["re", "im", "mass", "depth"])
        level, _, pts, ms = self.atoms()
        for n, z, m in zip(level, pts, ms):
            writer.writerow([repr(float(z.real)), repr(float(z.imag)), repr(float(m)), int(n)])


def build_conformal_atoms(f: MultiMap, xi, t: float, s: float, N: int,
                          policy: PruningPolicy | None = None, metric: str = "euclidean",
                          tree: PreimageTree | None = None) -> AtomicMeasure:
    """Truncated, normalised exponentially discounted pullback of a point mass at xi."""
    if N < 1:
        raise ValueError("truncation depth N must be positive")
    tr = tree if tree is not None else build_preimage_tree(f, xi, N + 1, policy, metric)
    if tr.depth < N + 1:
        raise ValueError("tree must reach depth N + 1")
    flags = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        logs = [log_level_sum(tr, n, t)[0] for n in range(N + 2)]
    if caught:
        flags.append("InfiniteSum")
        warnings.warn(str(caught[0].message), InfiniteSum, stacklevel=2)
    pressure = logs[N + 1] - logs[N]
    if not s > pressure:
        raise SeriesNotDecaying(f"s = {s:.6g} does not exceed the pressure estimate {pressure:.6g}")
    level_log_mass = np.array([-s * n + logs[n] for n in range(1, N + 1)])
    log_S = float(logsumexp(level_log_mass))
    masses = [np.zeros(0)]
    for n in range(1, N + 1):
        lv = tr.levels[n]
        m = np.zeros(len(lv))
        ok = lv.norm > 0 if t > 0 else np.ones(len(lv), dtype=bool)
        with np.errstate(divide="ignore"):
            logm = -s * n + np.log(lv.mult * lv.weight) - t * np.log(lv.norm) - log_S
        m[ok] = np.exp(logm[ok])
        masses.append(m)
    # renormalise against summation roundoff
    total = math.fsum(float(x) for n in range(1, N + 1) for x in masses[n])
    masses = [masses[0]] + [m / total for m in masses[1:]]
    log_S += math.log(total)
    return AtomicMeasure(tr, masses, float(t), float(s), int(N), complex(xi), log_S, logs, flags)


@dataclass
class PlanarMeasure:
    points: np.ndarray
    masses: np.ndarray

    @property
    def total_mass(self) -> float:
        return math.fsum(self.masses.tolist())

    def __len__(self):
        return self.points.size


def project_measure(nu, tol: float = 1e-9) -> PlanarMeasure:
    """Forget words and merge atoms sitting at the same point (within tol)."""
    if isinstance(nu, AtomicMeasure):
        _, _, pts, ms = nu.atoms()
    else:
        pts, ms = np.asarray(nu[0], dtype=complex), np.asarray(nu[1], dtype=float)
    if pts.size == 0:
        return PlanarMeasure(pts, ms)
    key = np.stack([np.round(pts.real / tol), np.round(pts.imag / tol)], axis=1)
    uniq, first, inverse = np.unique(key, axis=0, return_index=True, return_inverse=True)
    merged = np.bincount(inverse.ravel(), weights=ms, minlength=uniq.shape[0])
    return PlanarMeasure(pts[first], merged)


@dataclass
class GeometricReport:
    samples: list        # (z, r, ratio or None when the ball is empty)
    min_ratio: float
    max_ratio: float
    spread: float
    h_used: float
    empty_balls: int

    def to_json(self) -> dict:
        return {
            "samples": [[z.real, z.imag, r, q] for z, r, q in self.samples],
            "min_ratio": self.min_ratio,
            "max_ratio": self.max_ratio,
            "spread": self.spread,
            "h_used": self.h_used,
            "empty_balls": self.empty_balls,
        }


class BallIndex:
    """Closed-ball mass queries over a fixed planar atomic measure."""

    def __init__(self, m: PlanarMeasure):
        from scipy.spatial import cKDTree

        self._m = m
        self._tree = cKDTree(np.column_stack([m.points.real, m.points.imag]))

    def mass(self, z: complex, r: float) -> float:
        idx = self._tree.query_ball_point([z.real, z.imag], r)
        return math.fsum(self._m.masses[idx].tolist()) if idx else 0.0


def geometric_ratio_report(m: PlanarMeasure, h: float, centers, radii) -> GeometricReport:
    """m(B(z, r)) / r^h over all (center, radius) pairs."""
    index = BallIndex(m)
    samples = []
    vals = []
    empty = 0
    for z in centers:
        z = complex(z)
        for r in radii:
            mass = index.mass(z, float(r))
            if mass <= 0:
                empty += 1
                samples.append((z, float(r), None))
                continue
            q = mass / float(r) ** h
            vals.append(q)
            samples.append((z, float(r), q))
    if not vals:
        return GeometricReport(samples, float("nan"), float("nan"), float("nan"), h, empty)
    lo, hi = min(vals), max(vals)
    return GeometricReport(samples, lo, hi, hi / lo, float(h), empty)


def conformality_residual(nu: AtomicMeasure, f: MultiMap, t: float | None = None,
                          s: float | None = None) -> float:
    """Total-variation gap between exp(-s) L_t^* nu and nu minus its first level.

    For the untruncated measure the two agree; truncation at depth N leaves
    exactly the level N+1 mass of the pushed measure.
    """
    t = nu.t if t is None else t
    s = nu.s if s is None else s
    tr = nu.tree
    resid = 0.0
    for k in range(2, nu.N + 2):
        child, parent_lv = tr.levels[k], tr.levels[k - 1]
        parent_mass = nu.masses[k - 1]
        pushed = np.zeros(len(child))
        for j, g in enumerate(f.generators):
            sel = np.nonzero(child.symbol == j)[0]
            if sel.size == 0:
                continue
            y = child.points[sel]
            step = np.abs(g.deriv_array(y)) if tr.metric == "euclidean" else g.spherical_norm_array(y)
            par = child.parent[sel]
            local_mult = child.mult[sel] // parent_lv.mult[par]
            reweight = child.weight[sel] / parent_lv.weight[par]
            ok = step > 0 if t > 0 else np.ones(sel.size, dtype=bool)
            with np.errstate(divide="ignore"):
                factor = np.exp(-s) * local_mult * reweight * step ** (-t)
            pushed[sel[ok]] = parent_mass[par[ok]] * factor[ok]
        target = nu.masses[k] if k <= nu.N else np.zeros(len(child))
        resid += math.fsum(np.abs(pushed - target).tolist())
    return resid
