"""Numerical checks of the open set condition, semi-hyperbolicity and
Koebe's one-quarter bound on inverse branches."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import mpmath
import numpy as np
from scipy.stats import qmc

from .catalog import Region
from .rational import RationalMap, critical_points, is_inf
from .words import MultiMap, compose_apply, word_derivative

ESCAPE = 1e6
_MAX_WITNESSES = 100


# ---------------------------------------------------------------------------
# Open set condition
# ---------------------------------------------------------------------------

@dataclass
class OSCReport:
    osc1_violations: int
    osc2_violations: int
    osc1_witnesses: list
    osc2_witnesses: list
    osc3_alpha: float
    grid_size: int
    mc_samples: int
    bounds: tuple
    osc3_by_radius: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.osc1_violations == 0 and self.osc2_violations == 0

    def to_json(self) -> dict:
        return {
            "osc1_violations": self.osc1_violations,
            "osc2_violations": self.osc2_violations,
            "osc1_witnesses": [[z.real, z.imag] for z in self.osc1_witnesses],
            "osc2_witnesses": [[z.real, z.imag] for z in self.osc2_witnesses],
            "osc3_alpha": self.osc3_alpha,
            "osc3_by_radius": [[r, a] for r, a in self.osc3_by_radius],
            "grid_size": self.grid_size,
            "mc_samples": self.mc_samples,
            "bounds": list(self.bounds),
            "passed": self.passed,
        }


def _margin(U: Region, z: np.ndarray) -> np.ndarray:
    """Distance-like slack of the membership decision; small means borderline."""
    p = U.params
    if U.kind == "disk":
        return np.abs(np.abs(z - p["center"]) - p["radius"])
    if U.kind == "annulus":
        r = np.abs(z - p["center"])
        return np.minimum(np.abs(r - p["r_in"]), np.abs(r - p["r_out"]))
    if U.kind == "rectangle":
        return np.min(np.abs(np.stack([z.real - p["x0"], z.real - p["x1"],
                                       z.imag - p["y0"], z.imag - p["y1"]])), axis=0)
    return np.full(z.shape, np.inf)


def _mp_contains(U: Region, z) -> bool:
    p = U.params
    if U.kind == "disk":
        return abs(z - mpmath.mpc(p["center"])) < p["radius"]
    if U.kind == "annulus":
        r = abs(z - mpmath.mpc(p["center"]))
        return p["r_in"] < r < p["r_out"]
    if U.kind == "rectangle":
        return p["x0"] < z.real < p["x1"] and p["y0"] < z.imag < p["y1"]
    return bool(U.contains(np.array([complex(z)]))[0])


def _mp_eval(g: RationalMap, z):
    num = mpmath.polyval([mpmath.mpc(c) for c in g.num.coeffs[::-1]], z)
    den = mpmath.polyval([mpmath.mpc(c) for c in g.den.coeffs[::-1]], z)
    return num / den


def _verify(U: Region, f: MultiMap, pts: np.ndarray, test) -> np.ndarray:
    """Re-evaluate borderline grid points at 50 digits; ``test`` gets
    (membership of x, list of memberships of f_j(x))."""
    keep = np.ones(pts.size, dtype=bool)
    with mpmath.workdps(50):
        for i, z in enumerate(pts):
            x = mpmath.mpc(z.real, z.imag)
            in_x = _mp_contains(U, x)
            in_img = [_mp_contains(U, _mp_eval(g, x)) for g in f.generators]
            keep[i] = test(in_x, in_img)
    return keep


def _stereo(z: np.ndarray) -> np.ndarray:
    r2 = np.abs(z) ** 2
    return np.stack([2 * z.real, 2 * z.imag, r2 - 1], axis=-1) / (1 + r2)[..., None]


def _unstereo(X: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        z = (X[..., 0] + 1j * X[..., 1]) / (1 - X[..., 2])
    return np.where(X[..., 2] > 1 - 1e-15, complex(np.inf, 0), z)


def spherical_ball_samples(x: complex, r: float, n: int, rng: np.random.Generator,
                           quasi: bool = True) -> np.ndarray:
    """Points uniform (for spherical area) in the chordal ball B_s(x, r), r <= 2.

    With ``quasi`` the two cap coordinates come from a scrambled Sobol
    sequence, which keeps the area-fraction error near 1/n.
    """
    theta = 2 * math.asin(min(r, 2.0) / 2)
    X = _stereo(np.array([x]))[0]
    helper = np.array([1.0, 0, 0]) if abs(X[0]) < 0.9 else np.array([0, 1.0, 0])
    e1 = np.cross(X, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(X, e1)
    if quasi:
        u = qmc.Sobol(2, scramble=True, seed=rng).random_base2(max(0, math.ceil(math.log2(n))))[:n]
    else:
        u = rng.random((n, 2))
    cos_a = math.cos(theta) + (1.0 - math.cos(theta)) * u[:, 0]
    sin_a = np.sqrt(np.maximum(0.0, 1 - cos_a ** 2))
    phi = 2 * math.pi * u[:, 1]
    P = cos_a[:, None] * X + sin_a[:, None] * (np.cos(phi)[:, None] * e1 + np.sin(phi)[:, None] * e2)
    return _unstereo(P)


def check_osc(f: MultiMap, U: Region, grid: int = 1000, mc: int = 100_000, bounds=None,
              seed: int = 0, n_centers: int = 50, radii=None, verify_margin: float = 1e-9) -> OSCReport:
    """Grid test of (osc1) and (osc2), Monte Carlo estimate of the (osc3) density.

    f_j^{-1}(U) membership is decided by evaluating f_j forward.  Grid points
    whose decision is within ``verify_margin`` of flipping are re-checked in
    50-digit arithmetic before they count as witnesses.
    """
    if bounds is None:
        x0, x1, y0, y1 = U.bounding_box()
        mx, my = 0.25 * (x1 - x0), 0.25 * (y1 - y0)
        bounds = (x0 - mx, x1 + mx, y0 - my, y1 + my)
    x0, x1, y0, y1 = bounds
    xs = np.linspace(x0, x1, grid)
    ys = np.linspace(y0, y1, grid)
    Z = xs[None, :] + 1j * ys[:, None]
    in_u = U.contains(Z)
    margin = _margin(U, Z)
    in_img, images = [], []
    for g in f.generators:
        with np.errstate(all="ignore"):
            W = g.eval_array(Z)
        in_img.append(U.contains(W) & np.isfinite(W))
        images.append(W)

    any_img = np.logical_or.reduce(in_img)
    cand1 = any_img & ~in_u
    pair = np.zeros_like(in_u)
    for i in range(f.u):
        for j in range(i + 1, f.u):
            pair |= in_img[i] & in_img[j]
    cand2 = pair

    def scale(z):
        return np.maximum(1.0, np.abs(z))

    border = margin <= verify_margin * scale(Z)
    for W in images:
        with np.errstate(all="ignore"):
            border |= _margin(U, W) <= verify_margin * scale(W)

    w1 = Z[cand1]
    b1 = border[cand1]
    if b1.any():
        ok = _verify(U, f, w1[b1], lambda in_x, imgs: any(imgs) and not in_x)
        w1 = np.concatenate([w1[~b1], w1[b1][ok]])
    w2 = Z[cand2]
    b2 = border[cand2]
    if b2.any():
        ok = _verify(U, f, w2[b2], lambda in_x, imgs: sum(imgs) >= 2)
        w2 = np.concatenate([w2[~b2], w2[b2][ok]])

    alpha, by_radius, used = _osc3_alpha(U, Z, in_u, mc, seed, n_centers, radii)
    return OSCReport(int(w1.size), int(w2.size), [complex(z) for z in w1[:_MAX_WITNESSES]],
                     [complex(z) for z in w2[:_MAX_WITNESSES]], alpha, grid, used, tuple(bounds), by_radius)


def _osc3_alpha(U: Region, Z: np.ndarray, in_u: np.ndarray, mc: int, seed: int, n_centers: int, radii):
    rng = np.random.default_rng(seed)
    outside_nb = np.zeros_like(in_u)
    outside_nb[1:, :] |= ~in_u[:-1, :]
    outside_nb[:-1, :] |= ~in_u[1:, :]
    outside_nb[:, 1:] |= ~in_u[:, :-1]
    outside_nb[:, :-1] |= ~in_u[:, 1:]
    boundary = Z[in_u & outside_nb]
    if boundary.size == 0:
        return float("nan"), [], 0
    centers = boundary[np.sort(rng.choice(boundary.size, size=min(n_centers, boundary.size), replace=False))]
    radii = np.geomspace(1e-3, 1.0, 8) if radii is None else np.asarray(radii, dtype=float)
    # Sobol balance needs a power of two per ball, so round the share up
    per = 1 << max(0, math.ceil(math.log2(max(1, mc / (centers.size * radii.size)))))
    alpha = 1.0
    by_radius = []
    for r in radii:
        worst = 1.0
        for c in centers:
            pts = spherical_ball_samples(complex(c), float(r), per, rng)
            frac = float(np.mean(U.contains(pts) & np.isfinite(pts)))
            worst = min(worst, frac)
        by_radius.append((float(r), worst))
        alpha = min(alpha, worst)
    return alpha, by_radius, per * centers.size * radii.size


# ---------------------------------------------------------------------------
# Semi-hyperbolicity heuristic
# ---------------------------------------------------------------------------

@dataclass
class CriticalPairCheck:
    c: complex
    j: int
    distance_to_julia: float
    min_distance: float | None
    depth: int
    verdict: str          # consistent | violated | inconclusive | not-in-J


@dataclass
class SemiHypReport:
    pairs: list
    depth: int
    dist_tol: float
    note: str = "only the return-distance condition is checked; non-convergence of inverse branches is not"

    @property
    def verdict(self) -> str:
        active = [p.verdict for p in self.pairs if p.verdict != "not-in-J"]
        if "violated" in active:
            return "violated"
        if "inconclusive" in active:
            return "inconclusive"
        return "consistent"

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "depth": self.depth,
            "dist_tol": self.dist_tol,
            "note": self.note,
            "pairs": [{"c": [p.c.real, p.c.imag], "j": p.j, "distance_to_julia": p.distance_to_julia,
                       "min_distance": p.min_distance, "verdict": p.verdict} for p in self.pairs],
        }


def forward_orbit(f: MultiMap, v: complex, depth: int) -> np.ndarray:
    """{f_w(v) : |w| <= depth}, deduplicated, escaping points dropped."""
    seen = {}
    frontier = np.array([v], dtype=complex)
    for k in range(depth + 1):
        for z in frontier:
            seen.setdefault((round(z.real, 11), round(z.imag, 11)), complex(z))
        if k == depth or frontier.size == 0:
            break
        nxt = []
        for g in f.generators:
            with np.errstate(all="ignore"):
                img = g.eval_array(frontier)
            nxt.append(img[np.isfinite(img) & (np.abs(img) < ESCAPE)])
        frontier = np.unique(np.round(np.concatenate(nxt), 11))
    return np.array(list(seen.values()), dtype=complex)


def check_semihyperbolicity(f: MultiMap, julia, depth: int = 10, dist_tol: float = 1e-2) -> SemiHypReport:
    """Return distance of each critical point in J(G) to the forward orbit of its image."""
    from scipy.spatial import cKDTree

    pts = np.asarray(getattr(julia, "points", julia), dtype=complex)
    kd = cKDTree(np.column_stack([pts.real, pts.imag]))
    pairs = []
    for j, g in enumerate(f.generators, start=1):
        for c, _ in critical_points(g).roots:
            if is_inf(c):
                continue
            dj = float(kd.query([c.real, c.imag])[0])
            if dj > dist_tol:
                pairs.append(CriticalPairCheck(c, j, dj, None, depth, "not-in-J"))
                continue
            v = g(c)
            orbit = forward_orbit(f, v, depth) if not is_inf(v) else np.zeros(0, dtype=complex)
            if orbit.size == 0:
                pairs.append(CriticalPairCheck(c, j, dj, math.inf, depth, "consistent"))
                continue
            dmin = float(np.min(np.abs(orbit - c)))
            if dmin <= dist_tol:
                verdict = "violated"
            elif dmin > 10 * dist_tol:
                verdict = "consistent"
            else:
                verdict = "inconclusive"
            pairs.append(CriticalPairCheck(c, j, dj, dmin, depth, verdict))
    return SemiHypReport(pairs, depth, dist_tol)


# ---------------------------------------------------------------------------
# Koebe one-quarter check on inverse branches
# ---------------------------------------------------------------------------

@dataclass
class KoebeCheck:
    word: tuple
    z: complex
    x: complex
    branch_radius: float
    r: float
    inner_radius: float
    violations: int
    samples: int


def word_critical_values(f: MultiMap, word) -> list:
    """Finite critical values of f_word."""
    out = []
    for k, s in enumerate(word):
        rest = word[k:]
        for c, _ in critical_points(f[s]).roots:
            if is_inf(c):
                continue
            v = compose_apply(f, rest, c)
            if not is_inf(v):
                out.append(v)
    return out


def koebe_check(f: MultiMap, word, z: complex, x: complex, samples: int = 200,
                radius_fraction: float = 0.5) -> KoebeCheck:
    """Sample the circle of radius |H'(z)| r / 4 about x = H(z) and test that
    every sample maps under f_word into B(z, r).

    H is the inverse branch of f_word with H(z) = x, univalent on the disk
    about z that avoids the critical values of f_word; r is
    ``radius_fraction`` of that disk's radius.
    """
    word = tuple(word)
    cvs = word_critical_values(f, word)
    R = min((abs(z - v) for v in cvs), default=1.0)
    r = radius_fraction * R
    dH = 1.0 / abs(word_derivative(f, word, x).value)
    rho = dH * r / 4
    theta = 2 * np.pi * np.arange(samples) / samples
    ws = x + rho * np.exp(1j * theta)
    bad = 0
    for w in ws:
        y = compose_apply(f, word, complex(w))
        if not abs(y - z) < r:
            bad += 1
    return KoebeCheck(word, z, x, R, r, rho, bad, samples)
