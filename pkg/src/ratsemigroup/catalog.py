"""Named example multi-maps and the parametric two-map family.

``pm2``      z^2+2, z^2-2 with U = B(0, 2)
``fig2``     squares of z^2-1 and z^2/4
``cantor3``  3z, 3z-2 (middle-third Cantor set on [0, 1])
``cantor3x3`` 3z, 3z-1, 3z-2 (attractor [0, 1], dimension 1)
``dup``      z^2, z^2 duplicated-generator probe (fails the disjointness test)
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ForbiddenPair, NonpositiveRadius, UnknownName
from .rational import RationalMap
from .words import MultiMap


@dataclass(frozen=True)
class Region:
    """Open planar region with a vectorised membership test.

    kinds: ``disk`` (center, radius), ``annulus`` (center, r_in, r_out),
    ``rectangle`` (x0, x1, y0, y1) and ``hull_difference`` (outer, inner,
    iterations), the set int K(outer) minus K(inner) of two polynomial
    filled Julia sets, approximated by bounded-orbit tests.
    """

    kind: str
    params: dict

    def __post_init__(self):
        p = self.params
        if self.kind == "disk":
            if p["radius"] <= 0:
                raise ValueError("disk radius must be positive")
        elif self.kind == "annulus":
            if not 0 <= p["r_in"] < p["r_out"]:
                raise ValueError("annulus needs 0 <= r_in < r_out")
        elif self.kind == "rectangle":
            if not (p["x0"] < p["x1"] and p["y0"] < p["y1"]):
                raise ValueError("rectangle must have positive extent")
        elif self.kind == "hull_difference":
            for key in ("outer", "inner"):
                if not p[key].is_polynomial:
                    raise ValueError("hull_difference needs polynomial maps")
        else:
            raise ValueError(f"unknown region kind {self.kind!r}")

    @classmethod
    def disk(cls, center, radius) -> "Region":
        return cls("disk", {"center": complex(center), "radius": float(radius)})

    @classmethod
    def annulus(cls, center, r_in, r_out) -> "Region":
        return cls("annulus", {"center": complex(center), "r_in": float(r_in), "r_out": float(r_out)})

    @classmethod
    def rectangle(cls, x0, x1, y0, y1) -> "Region":
        return cls("rectangle", {"x0": float(x0), "x1": float(x1), "y0": float(y0), "y1": float(y1)})

    @classmethod
    def hull_difference(cls, outer: RationalMap, inner: RationalMap, iterations: int = 500) -> "Region":
        return cls("hull_difference", {"outer": outer, "inner": inner, "iterations": int(iterations)})

    def contains(self, z):
        z = np.asarray(z, dtype=complex)
        p = self.params
        if self.kind == "disk":
            return np.abs(z - p["center"]) < p["radius"]
        if self.kind == "annulus":
            r = np.abs(z - p["center"])
            return (r > p["r_in"]) & (r < p["r_out"])
        if self.kind == "rectangle":
            return (z.real > p["x0"]) & (z.real < p["x1"]) & (z.imag > p["y0"]) & (z.imag < p["y1"])
        inside_outer = filled_julia_mask(p["outer"], z, p["iterations"])
        inside_inner = filled_julia_mask(p["inner"], z, p["iterations"])
        return inside_outer & ~inside_inner

    def bounding_box(self):
        p = self.params
        if self.kind == "disk":
            c, r = p["center"], p["radius"]
            return c.real - r, c.real + r, c.imag - r, c.imag + r
        if self.kind == "annulus":
            c, r = p["center"], p["r_out"]
            return c.real - r, c.real + r, c.imag - r, c.imag + r
        if self.kind == "rectangle":
            return p["x0"], p["x1"], p["y0"], p["y1"]
        R = escape_radius(p["outer"])
        return -R, R, -R, R

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        for k, v in self.params.items():
            if isinstance(v, complex):
                out[k] = [v.real, v.imag]
            elif isinstance(v, RationalMap):
                out[k] = v.to_json()
            else:
                out[k] = v
        return out

    @classmethod
    def from_json(cls, data) -> "Region":
        kind = data["kind"]
        if kind == "disk":
            return cls.disk(complex(*data["center"]), data["radius"])
        if kind == "annulus":
            return cls.annulus(complex(*data["center"]), data["r_in"], data["r_out"])
        if kind == "rectangle":
            return cls.rectangle(data["x0"], data["x1"], data["y0"], data["y1"])
        if kind == "hull_difference":
            return cls.hull_difference(RationalMap.from_json(data["outer"]),
                                       RationalMap.from_json(data["inner"]),
                                       data.get("iterations", 500))
        raise ValueError(f"unknown region kind {kind!r}")


def escape_radius(p: RationalMap) -> float:
    """Radius beyond which |p(z)| >= 2|z|, so orbits escape."""
    c = p.num.coeffs / p.den.coeffs[0]
    d = c.size - 1
    lead = abs(c[-1])
    lower = float(np.sum(np.abs(c[:-1])))
    return max(1.0, (lower + 2.0) / lead, (2.0 / lead) ** (1.0 / max(d - 1, 1)) if d > 1 else 1.0)


def filled_julia_mask(p: RationalMap, z, iterations: int = 500):
    """Bounded-orbit test: True where the orbit stays within the escape radius."""
    R = escape_radius(p)
    z = np.array(z, dtype=complex, copy=True)
    alive = np.ones(z.shape, dtype=bool)
    for _ in range(iterations):
        with np.errstate(over="ignore", invalid="ignore"):
            z[alive] = p.eval_array(z[alive])
        alive &= np.abs(z) <= R
        if not alive.any():
            break
    return alive


def poly_map(*coeffs) -> RationalMap:
    return RationalMap.poly(list(coeffs))


def _square(g: RationalMap) -> RationalMap:
    return g.compose(g)


def family_c0(d1: int, d: int, r: float) -> float:
    """Size threshold for the scaling parameter of the two-map family
    (f1, lam (z - b)^d + b) when f1 is monic, b = 0 and the closed disk of
    radius r lies in the interior of K(f1)."""
    if int(d1) != d1 or int(d) != d or d1 < 2 or d < 2:
        raise ValueError("degrees must be integers >= 2")
    if (d1, d) == (2, 2):
        raise ForbiddenPair("degree pair (2, 2) is excluded")
    if not r > 0:
        raise NonpositiveRadius("r must be positive")
    coef = d * (d - 1) * d1 / (d + d1 - d1 * d)
    inner = math.log(2) - math.log(0.5) / d1 - math.log(r) / d
    return math.exp(coef * inner)


def two_map_family(f1_coeffs, b: complex, d: int, lam: complex, r: float | None = None) -> MultiMap:
    """(f1, lam (z - b)^d + b); with ``r`` given, requires 0 < |lam| < c0."""
    f1 = RationalMap.poly(f1_coeffs)
    if not f1.is_polynomial or f1.degree < 2:
        raise ValueError("f1 must be a polynomial of degree >= 2")
    lam = complex(lam)
    if lam == 0:
        raise ValueError("lam must be nonzero")
    if r is not None:
        c0 = family_c0(f1.degree, d, r)
        if abs(lam) >= c0:
            raise ValueError(f"|lam| = {abs(lam)} is not below c0 = {c0}")
    # expand lam (z - b)^d + b
    coeffs = np.array([lam * math.comb(d, k) * (-b) ** (d - k) for k in range(d + 1)], dtype=complex)
    coeffs[0] += b
    return MultiMap((f1, RationalMap.poly(coeffs)), ("f1", "f_lam"))


def two_map_region(f: MultiMap, iterations: int = 500) -> Region:
    """U = int K(f_lam) minus K(f1)."""
    return Region.hull_difference(f.generators[1], f.generators[0], iterations)


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    multimap: MultiMap
    region: Region | None
    osc_expected: bool
    note: str


def builtin_examples() -> dict:
    pm2 = MultiMap((poly_map(2, 0, 1), poly_map(-2, 0, 1)), ("z^2+2", "z^2-2"))
    g1, g2 = poly_map(-1, 0, 1), poly_map(0, 0, 0.25)
    fig2 = MultiMap((_square(g1), _square(g2)), ("(z^2-1)^2-1", "(z^2/4)^2/4"))
    cantor3 = MultiMap((poly_map(0, 3), poly_map(-2, 3)), ("3z", "3z-2"))
    cantor3x3 = MultiMap((poly_map(0, 3), poly_map(-1, 3), poly_map(-2, 3)), ("3z", "3z-1", "3z-2"))
    dup = MultiMap((poly_map(0, 0, 1), poly_map(0, 0, 1)), ("z^2", "z^2"))
    entries = [
        CatalogEntry("pm2", pm2, Region.disk(0, 2), True, "semi-hyperbolic, not hyperbolic; U = B(0, 2)"),
        CatalogEntry("fig2", fig2, None, False, "second iterates of z^2-1 and z^2/4"),
        CatalogEntry("cantor3", cantor3, Region.disk(0.5, 0.5), True, "middle-third Cantor set"),
        CatalogEntry("cantor3x3", cantor3x3, Region.disk(0.5, 0.5), True, "three thirds; attractor [0, 1]"),
        CatalogEntry("dup", dup, Region.disk(0, 1), False, "identical generators overlap everywhere"),
    ]
    return {e.name: e for e in entries}


def get_example(name: str) -> CatalogEntry:
    cat = builtin_examples()
    if name not in cat:
        raise UnknownName(f"no built-in example named {name!r}; known: {sorted(cat)}")
    return cat[name]
