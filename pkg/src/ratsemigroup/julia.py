"""Point-cloud approximations of J(G), rasterisation and box counting."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import EmptyCloud, DegenerateFit, NoRepellingFixedPoint
from .rational import Polynomial, RationalMap, is_inf, poly_roots
from .words import MultiMap, PruningPolicy, backward_chains, build_preimage_tree


def repelling_fixed_point(g: RationalMap) -> complex:
    """A finite fixed point with |g'| > 1.

    When several exist the most strongly repelling one is returned (ties
    broken by real, then imaginary part), so the choice is deterministic.
    """
    eq = Polynomial((g.num - Polynomial([0, 1]) * g.den).coeffs, trim_tol=1e-14)
    if eq.degree < 1:
        raise NoRepellingFixedPoint("map has no finite fixed points")
    cands = []
    for z, _ in poly_roots(eq).roots:
        if is_inf(z):
            continue
        if g.den(z) == 0:
            continue
        mult = abs(complex(g.deriv_array(np.array([z]))[0]))
        if mult > 1 + 1e-9:
            cands.append((-mult, round(z.real, 12), round(z.imag, 12), z))
    if not cands:
        raise NoRepellingFixedPoint("no finite repelling fixed point")
    cands.sort(key=lambda c: c[:3])
    z = cands[0][3]
    # tidy signed zeros and roundoff in the imaginary part of real roots
    return complex(z.real + 0.0, z.imag if abs(z.imag) > 1e-14 * max(1, abs(z)) else 0.0)


def seed_point(f: MultiMap) -> complex:
    for g in f.generators:
        try:
            return repelling_fixed_point(g)
        except NoRepellingFixedPoint:
            continue
    raise NoRepellingFixedPoint("no generator has a repelling fixed point")


@dataclass
class PointCloud:
    points: np.ndarray
    method: str
    burn_in: int = 0
    source: str = ""
    seed: complex = 0j

    def __len__(self):
        return self.points.size

    def stats(self) -> dict:
        p = self.points
        return {
            "count": int(p.size),
            "method": self.method,
            "burn_in": self.burn_in,
            "source": self.source,
            "max_abs": float(np.max(np.abs(p))) if p.size else 0.0,
            "re_range": [float(p.real.min()), float(p.real.max())] if p.size else [],
            "im_range": [float(p.imag.min()), float(p.imag.max())] if p.size else [],
        }


def approximate_julia(f: MultiMap, method: str = "full_tree", depth: int = 8, length: int = 100_000,
                      burn_in: int = 20, seed: int = 0, budget: int = 2 ** 24, chains: int = 256,
                      start=None) -> PointCloud:
    """Backward-orbit approximation of J(G) started at a repelling fixed point.

    ``full_tree`` returns every depth-``depth`` preimage of the start point;
    ``chaos_game`` runs ``chains`` random backward orbits in lockstep,
    drops the first ``burn_in`` steps of each and keeps ``length`` points.
    """
    z0 = seed_point(f) if start is None else complex(start)
    src = f.digest()
    if method == "full_tree":
        tree = build_preimage_tree(f, z0, depth, PruningPolicy("exhaustive", budget=budget))
        return PointCloud(tree.levels[-1].points.copy(), method, 0, src, z0)
    if method == "chaos_game":
        if length < 1:
            raise ValueError("length must be positive")
        chains = max(1, min(chains, length))
        steps = burn_in + math.ceil(length / chains)
        orbit = backward_chains(f, np.full(chains, z0), steps, seed)
        pts = orbit[burn_in:].ravel()[:length]
        return PointCloud(pts, method, burn_in, src, z0)
    raise ValueError(f"unknown method {method!r}")


@dataclass(frozen=True)
class Viewport:
    center: complex
    half_width: float
    half_height: float
    pixels_x: int
    pixels_y: int

    def __post_init__(self):
        if not (self.half_width > 0 and self.half_height > 0):
            raise ValueError("viewport half-extents must be positive")
        if not (int(self.pixels_x) == self.pixels_x >= 1 and int(self.pixels_y) == self.pixels_y >= 1):
            raise ValueError("pixel counts must be positive integers")
        want = self.half_height / self.half_width
        got = self.pixels_y / self.pixels_x
        if abs(got / want - 1) > 0.01:
            raise ValueError(f"aspect mismatch: pixels {got:.4f} vs extent {want:.4f}")

    @classmethod
    def square(cls, center=0j, half_width: float = 2.2, pixels: int = 512) -> "Viewport":
        return cls(complex(center), half_width, half_width, pixels, pixels)

    @property
    def pixel_pitch(self) -> float:
        return 2 * self.half_width / self.pixels_x

    def pixel_centers(self) -> np.ndarray:
        """(pixels_y, pixels_x) complex array; row 0 is the top edge."""
        c = complex(self.center)
        xs = c.real - self.half_width + (np.arange(self.pixels_x) + 0.5) * 2 * self.half_width / self.pixels_x
        ys = c.imag + self.half_height - (np.arange(self.pixels_y) + 0.5) * 2 * self.half_height / self.pixels_y
        return xs[None, :] + 1j * ys[:, None]


@dataclass
class Image:
    counts: np.ndarray
    outside: int = 0

    def to_uint8(self) -> np.ndarray:
        top = int(self.counts.max()) if self.counts.size else 0
        if top == 0:
            return np.zeros(self.counts.shape, dtype=np.uint8)
        scaled = np.log1p(self.counts.astype(float)) / math.log1p(top) * 255.0
        out = np.ceil(scaled).astype(np.uint8)
        return out

    def write_png(self, path):
        from PIL import Image as PILImage

        PILImage.fromarray(self.to_uint8(), mode="L").save(path, format="PNG")


def rasterize(cloud: PointCloud, vp: Viewport) -> Image:
    pts = np.asarray(cloud.points, dtype=complex)
    if pts.size == 0:
        raise EmptyCloud("cannot rasterise an empty cloud")
    c = complex(vp.center)
    col = np.floor((pts.real - (c.real - vp.half_width)) / (2 * vp.half_width) * vp.pixels_x)
    row = np.floor(((c.imag + vp.half_height) - pts.imag) / (2 * vp.half_height) * vp.pixels_y)
    ok = np.isfinite(col) & np.isfinite(row) & (col >= 0) & (col < vp.pixels_x) & (row >= 0) & (row < vp.pixels_y)
    flat = row[ok].astype(np.int64) * vp.pixels_x + col[ok].astype(np.int64)
    counts = np.bincount(flat, minlength=vp.pixels_x * vp.pixels_y).astype(np.uint32)
    outside = int(pts.size - np.count_nonzero(ok))
    if outside:
        warnings.warn(f"{outside} cloud points fall outside the viewport", stacklevel=2)
    return Image(counts.reshape(vp.pixels_y, vp.pixels_x), outside)


@dataclass
class DimensionFit:
    epsilons: list
    counts: list
    slope: float
    intercept: float
    r2: float
    ci: float
    warnings: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"epsilons": self.epsilons, "counts": self.counts, "slope": self.slope,
                "r2": self.r2, "ci": self.ci}


def default_epsilons(points: np.ndarray, steps: int = 12, decades: float = 2.5) -> np.ndarray:
    extent = float(max(np.ptp(points.real), np.ptp(points.imag))) if points.size else 0.0
    if extent == 0:
        extent = 1.0
    top = extent / 4
    return top * np.logspace(0, -decades, steps)


def box_count_dimension(cloud, epsilons=None, offsets: int = 4, seed: int = 0) -> DimensionFit:
    """Least-squares slope of log N(eps) against log(1/eps).

    Each N(eps) averages the occupied-box counts of ``offsets`` randomly
    shifted grids.
    """
    pts = np.asarray(getattr(cloud, "points", cloud), dtype=complex)
    if pts.size == 0:
        raise EmptyCloud("cannot box-count an empty cloud")
    notes = []
    if pts.size < 1000:
        notes.append(f"only {pts.size} points; box counts may be unreliable")
        warnings.warn(notes[-1], stacklevel=2)
    eps = np.sort(np.asarray(default_epsilons(pts) if epsilons is None else epsilons, dtype=float))[::-1]
    if eps.size < 4:
        raise ValueError("need at least four box sizes")
    rng = np.random.default_rng(seed)
    x0, y0 = pts.real.min(), pts.imag.min()
    counts = []
    for e in eps:
        tot = 0
        for _ in range(offsets):
            ox, oy = rng.random(2) * e
            ix = np.floor((pts.real - x0 + ox) / e).astype(np.int64)
            iy = np.floor((pts.imag - y0 + oy) / e).astype(np.int64)
            key = ix * (np.int64(1) << 31) + iy
            tot += np.unique(key).size
        counts.append(tot / offsets)
    counts = np.array(counts)
    x = np.log(1.0 / eps)
    y = np.log(counts)
    if np.ptp(y) == 0:
        msg = "box counts are identical at every scale"
        warnings.warn(msg, DegenerateFit, stacklevel=2)
        return DimensionFit(eps.tolist(), counts.tolist(), 0.0, float(y[0]), float("nan"), float("nan"),
                            notes + [msg])
    res = stats.linregress(x, y)
    tcrit = stats.t.ppf(0.975, eps.size - 2)
    return DimensionFit(eps.tolist(), counts.tolist(), float(res.slope), float(res.intercept),
                        float(res.rvalue ** 2), float(tcrit * res.stderr), notes)


def hausdorff_distance(a, b) -> float:
    """Symmetric Hausdorff distance between two finite planar point sets."""
    from scipy.spatial import cKDTree

    A = np.column_stack([np.real(a), np.imag(a)])
    B = np.column_stack([np.real(b), np.imag(b)])
    d1, _ = cKDTree(B).query(A)
    d2, _ = cKDTree(A).query(B)
    return float(max(d1.max(), d2.max()))
