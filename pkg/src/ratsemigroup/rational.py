"""Complex polynomials and rational maps of the Riemann sphere.

Infinity is represented by ``INF = complex(inf, 0)``; every scalar routine
accepts it and returns it where appropriate.  Array routines assume finite
input and are what the tree/cloud code uses in its inner loops.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DegreeZero, NonConvergence, PoleDerivative

INF = complex(math.inf, 0.0)
CHART_SWITCH = 1e6
DEFAULT_TOL = 1e-10
CLUSTER_TOL = 1e-7
_EPS = np.finfo(float).eps


def is_inf(z) -> bool:
    return cmath.isinf(z) or cmath.isnan(z)


def chordal(a, b) -> float:
    """Chordal distance on the unit sphere; values lie in [0, 2]."""
    a_inf, b_inf = is_inf(a), is_inf(b)
    if a_inf and b_inf:
        return 0.0
    if a_inf:
        return 2.0 / math.sqrt(1.0 + abs(b) ** 2)
    if b_inf:
        return 2.0 / math.sqrt(1.0 + abs(a) ** 2)
    return 2.0 * abs(a - b) / math.sqrt((1.0 + abs(a) ** 2) * (1.0 + abs(b) ** 2))


def chordal_array(a, b):
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    return 2.0 * np.abs(a - b) / np.sqrt((1.0 + np.abs(a) ** 2) * (1.0 + np.abs(b) ** 2))


class Polynomial:
    """Complex polynomial with ascending coefficients.

    Trailing (highest-degree) zeros are trimmed on construction; the zero
    polynomial is stored as ``[0]`` and reports degree 0.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs, trim_tol: float = 0.0):
        c = np.array(np.atleast_1d(coeffs), dtype=complex)
        if c.ndim != 1 or c.size == 0:
            raise ValueError("coefficients must be a non-empty 1-d sequence")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        cut = trim_tol * float(np.max(np.abs(c)))
        last = c.size - 1
        while last > 0 and abs(c[last]) <= cut:
            last -= 1
        c = c[: last + 1].copy()
        c.setflags(write=False)
        self.coeffs = c

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    @property
    def lead(self) -> complex:
        return complex(self.coeffs[-1])

    def is_zero(self) -> bool:
        return self.degree == 0 and self.coeffs[0] == 0

    def __call__(self, z):
        # Horner, works for scalars and arrays alike
        c = self.coeffs
        acc = np.zeros_like(np.asarray(z, dtype=complex)) + c[-1]
        for a in c[-2::-1]:
            acc = acc * z + a
        return acc if np.ndim(acc) else complex(acc)

    def scale(self, z):
        """sum |a_k| |z|^k, the natural size of a Horner evaluation at z."""
        r = np.abs(np.asarray(z, dtype=complex))
        acc = np.zeros_like(r) + abs(self.coeffs[-1])
        for a in self.coeffs[-2::-1]:
            acc = acc * r + abs(a)
        return acc if np.ndim(acc) else float(acc)

    def deriv(self) -> "Polynomial":
        if self.degree == 0:
            return Polynomial([0.0])
        k = np.arange(1, self.coeffs.size)
        return Polynomial(self.coeffs[1:] * k)

    def __add__(self, other: "Polynomial") -> "Polynomial":
        n = max(self.coeffs.size, other.coeffs.size)
        out = np.zeros(n, dtype=complex)
        out[: self.coeffs.size] += self.coeffs
        out[: other.coeffs.size] += other.coeffs
        return Polynomial(out)

    def __neg__(self) -> "Polynomial":
        return Polynomial(-self.coeffs)

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + (-other)

    def __mul__(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            return Polynomial(np.convolve(self.coeffs, other.coeffs))
        return Polynomial(self.coeffs * complex(other))

    __rmul__ = __mul__

    def __eq__(self, other):
        return isinstance(other, Polynomial) and np.array_equal(self.coeffs, other.coeffs)

    def __hash__(self):
        return hash(self.coeffs.tobytes())

    def __repr__(self):
        return f"Polynomial({[complex(a) for a in self.coeffs]})"

    def padded(self, n: int) -> np.ndarray:
        out = np.zeros(n, dtype=complex)
        out[: self.coeffs.size] = self.coeffs
        return out

    def to_json(self) -> list:
        return [[float(a.real), float(a.imag)] for a in self.coeffs]

    @classmethod
    def from_json(cls, data) -> "Polynomial":
        vals = []
        for item in data:
            if isinstance(item, (list, tuple)):
                re, im = item
                vals.append(complex(re, im))
            else:
                vals.append(complex(item))
        return cls(vals)


@dataclass(frozen=True)
class RootSet:
    """Distinct roots with multiplicities; a root may be ``INF``."""

    roots: tuple[tuple[complex, int], ...]
    converged: bool = True

    @property
    def points(self) -> list[complex]:
        return [r for r, _ in self.roots]

    @property
    def multiplicities(self) -> list[int]:
        return [m for _, m in self.roots]

    @property
    def total(self) -> int:
        return sum(m for _, m in self.roots)

    @property
    def finite(self) -> "RootSet":
        return RootSet(tuple((r, m) for r, m in self.roots if not is_inf(r)), self.converged)

    def __len__(self):
        return len(self.roots)

    def __iter__(self):
        return iter(self.roots)


# ---------------------------------------------------------------------------
# Simultaneous (Aberth-Ehrlich) iteration, batched over rows
# ---------------------------------------------------------------------------

def _fujiwara(a: np.ndarray) -> np.ndarray:
    """Fujiwara root bound for each row of monic ascending coefficients."""
    d = a.shape[1] - 1
    k = np.arange(d)
    mags = np.abs(a[:, :d]).copy()
    mags[:, 0] /= 2.0
    with np.errstate(divide="ignore"):
        b = mags ** (1.0 / (d - k))
    return 2.0 * np.max(b, axis=1)


def _quadratic_batch(a: np.ndarray) -> np.ndarray:
    """Monic quadratics via the cancellation-free formula plus one Newton step."""
    a0, a1 = a[:, 0], a[:, 1]
    s = np.sqrt(a1 * a1 - 4 * a0)
    s = np.where((np.conj(a1) * s).real >= 0, s, -s)
    q = -(a1 + s) / 2
    with np.errstate(all="ignore"):
        other = a0 / q
    # fall back on the root sum when the product formula breaks down
    other = np.where((q != 0) & np.isfinite(other), other, -a1 - q)
    z = np.stack([q, other], axis=1)
    p = (z + a1[:, None]) * z + a0[:, None]
    dp = 2 * z + a1[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        step = p / dp
    # skip the polish where the roots (nearly) coincide
    step[~np.isfinite(step) | (np.abs(dp) <= 1e-6 * (np.abs(z) + np.abs(a1[:, None]) + 1))] = 0
    return z - step


def aberth_batch(coeffs: np.ndarray, max_iter: int = 500):
    """Roots of many polynomials of one common degree d >= 1.

    ``coeffs`` has shape (M, d+1), ascending, with nonzero last column.
    Returns ``(roots, ok)`` with roots of shape (M, d) and a per-row
    convergence mask.
    """
    coeffs = np.asarray(coeffs, dtype=complex)
    M, d1 = coeffs.shape
    d = d1 - 1
    if d < 1:
        raise DegreeZero("constant polynomial has no roots")
    a = coeffs / coeffs[:, -1:]
    if d == 1:
        return (-a[:, :1]).copy(), np.ones(M, dtype=bool)
    if d == 2:
        return _quadratic_batch(a), np.ones(M, dtype=bool)

    radius = _fujiwara(a)
    radius = np.where(radius > 0, radius, 1.0)
    angles = 2 * np.pi * np.arange(d) / d + 0.4
    # mild radial perturbation breaks symmetric starts
    jitter = 1.0 + 0.05 * np.cos(3.7 * np.arange(d) + 1.1)
    z = radius[:, None] * jitter[None, :] * np.exp(1j * angles)[None, :]
    frozen = np.zeros((M, d), dtype=bool)
    absa = np.abs(a)

    active = np.arange(M)
    for _ in range(max_iter):
        if active.size == 0:
            break
        za = z[active]
        aa = a[active]
        p = np.ones_like(za)
        dp = np.zeros_like(za)
        sc = np.ones(za.shape)
        rz = np.abs(za)
        for k in range(d - 1, -1, -1):
            dp = dp * za + p
            p = p * za + aa[:, k : k + 1]
            sc = sc * rz + absa[active, k : k + 1]
        small_res = np.abs(p) <= 16 * _EPS * sc
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = p / dp
            diff = za[:, :, None] - za[:, None, :]
            idx = np.arange(d)
            diff[:, idx, idx] = np.inf
            s = np.sum(1.0 / diff, axis=2)
            corr = ratio / (1.0 - ratio * s)
        bad = ~np.isfinite(corr)
        corr[bad] = 1e-3 * (1.0 + np.abs(za[bad]))
        fz = frozen[active] | small_res
        corr[fz] = 0.0
        z[active] = za - corr
        step_small = np.abs(corr) <= 4 * _EPS * np.maximum(1.0, np.abs(za))
        frozen[active] = fz | (step_small & ~bad)
        done = np.all(frozen[active], axis=1)
        active = active[~done]
    ok = np.all(frozen, axis=1)
    return z, ok


def _taylor_ok(p: Polynomial, c: complex, k: int) -> bool:
    """Whether c looks like a k-fold root of p at double precision."""
    c_abs = abs(c)
    coeffs, absc = p.coeffs, np.abs(p.coeffs)
    for j in range(k):
        # j-th Taylor coefficient at c and its absolute-value scale
        n = np.arange(j, coeffs.size)
        binom = np.array([math.comb(int(m), j) for m in n], dtype=float)
        tj = np.sum(binom * coeffs[j:] * c ** (n - j))
        sj = np.sum(binom * absc[j:] * c_abs ** (n - j))
        if abs(tj) > 1e2 * _EPS ** ((k - j) / k) * sj:
            return False
    return True


def _union_groups(pts, tol):
    n = len(pts)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            scale = max(1.0, abs(pts[i]), abs(pts[j]))
            if abs(pts[i] - pts[j]) <= tol * scale:
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return sorted(groups.values(), key=lambda g: g[0])


def cluster_roots(points: Sequence[complex], tol: float = CLUSTER_TOL, poly: Polynomial | None = None):
    """Group nearly equal roots; returns list of (mean point, count).

    Without ``poly`` points closer than ``tol`` (relative) merge.  With
    ``poly`` a looser neighbourhood is tried first and accepted only when
    the Taylor coefficients at the group mean vanish to the order implied
    by the group size; a k-fold root is only resolvable to about eps**(1/k).
    """
    pts = [complex(z) for z in points]
    out = []
    loose = _union_groups(pts, 1e-3) if poly is not None else _union_groups(pts, tol)
    for members in loose:
        if len(members) == 1:
            out.append((pts[members[0]], 1))
            continue
        c = complex(np.mean([pts[i] for i in members]))
        if poly is None or _taylor_ok(poly, c, len(members)):
            out.append((c, len(members)))
            continue
        sub_pts = [pts[i] for i in members]
        for sub in _union_groups(sub_pts, tol):
            out.append((complex(np.mean([sub_pts[i] for i in sub])), len(sub)))
    return out


def poly_roots(p: Polynomial, tol: float = DEFAULT_TOL, cluster_tol: float = CLUSTER_TOL,
               max_iter: int = 500) -> RootSet:
    """All roots of ``p`` with multiplicities.

    Raises ``NonConvergence`` (carrying the best iterate as a RootSet) when
    the iteration does not settle within ``max_iter`` sweeps.
    """
    if p.degree < 1:
        raise DegreeZero("constant polynomial has no roots")
    roots, ok = aberth_batch(p.coeffs[None, :], max_iter=max_iter)
    rs = RootSet(tuple(cluster_roots(roots[0], cluster_tol, poly=p)), bool(ok[0]))
    if not ok[0]:
        resid = np.abs(p(roots[0])) / np.maximum(p.scale(roots[0]), 1e-300)
        if np.max(resid) > tol:
            raise NonConvergence("Aberth iteration did not converge", best=rs)
        rs = RootSet(rs.roots, True)
    return rs


# ---------------------------------------------------------------------------
# Rational maps
# ---------------------------------------------------------------------------

class Derivative(NamedTuple):
    value: complex
    norm: float


class RationalMap:
    """f = P/Q with cached derivative numerator P'Q - PQ'."""

    def __init__(self, num, den=(1.0,), check: bool = True):
        P = num if isinstance(num, Polynomial) else Polynomial(num)
        Q = den if isinstance(den, Polynomial) else Polynomial(den)
        if Q.is_zero():
            raise ValueError("denominator is the zero polynomial")
        if P.is_zero():
            raise DegreeZero("zero map is constant")
        self.num = P
        self.den = Q
        self.degree = max(P.degree, Q.degree)
        if self.degree < 1:
            raise DegreeZero("rational map must be non-constant")
        dP, dQ = P.deriv(), Q.deriv()
        w = dP * Q - P * dQ
        self._wnum = Polynomial(w.coeffs, trim_tol=1e-13)
        if self._wnum.is_zero():
            raise DegreeZero("rational map is constant (P'Q - PQ' vanishes)")
        self._dnum_g = Polynomial((dQ * P - Q * dP).coeffs, trim_tol=1e-13)  # numerator of (Q/P)'
        if check and Q.degree >= 1 and P.degree >= 1:
            for r, _ in poly_roots(Q).roots:
                if abs(P(r)) <= 1e-9 * max(1.0, P.scale(r)):
                    raise ValueError(f"numerator and denominator share a root near {r}")

    # -- construction helpers ------------------------------------------------
    @classmethod
    def poly(cls, coeffs) -> "RationalMap":
        return cls(coeffs, (1.0,), check=False)

    @property
    def is_polynomial(self) -> bool:
        return self.den.degree == 0

    def chart_conjugate(self) -> "RationalMap":
        """F(u) = f(1/u), so that F^#(u) equals f^#(1/u)."""
        d, p, q = self.degree, self.num.degree, self.den.degree
        num = np.concatenate([np.zeros(d - p), self.num.coeffs[::-1]])
        den = np.concatenate([np.zeros(d - q), self.den.coeffs[::-1]])
        return RationalMap(num, den, check=False)

    def to_json(self) -> dict:
        return {"num": self.num.to_json(), "den": self.den.to_json()}

    @classmethod
    def from_json(cls, data) -> "RationalMap":
        den = data.get("den", [[1.0, 0.0]])
        return cls(Polynomial.from_json(data["num"]), Polynomial.from_json(den))

    def __eq__(self, other):
        return isinstance(other, RationalMap) and self.num == other.num and self.den == other.den

    def __hash__(self):
        return hash((self.num, self.den))

    def __repr__(self):
        if self.is_polynomial:
            return f"RationalMap.poly({[complex(a) for a in self.num.coeffs]})"
        return f"RationalMap({self.num!r}, {self.den!r})"

    def compose(self, inner: "RationalMap") -> "RationalMap":
        """self o inner, computed on homogeneous numerator/denominator pairs."""
        d = self.degree
        a, b = inner.num, inner.den

        def homog(poly: Polynomial) -> Polynomial:
            acc = Polynomial([0.0])
            for k, c in enumerate(poly.padded(d + 1)):
                if c == 0:
                    continue
                term = Polynomial([c])
                for _ in range(k):
                    term = term * a
                for _ in range(d - k):
                    term = term * b
                acc = acc + term
            return acc

        return RationalMap(homog(self.num), homog(self.den), check=False)

    # -- evaluation ----------------------------------------------------------
    def value_at_infinity(self) -> complex:
        p, q = self.num.degree, self.den.degree
        if p > q:
            return INF
        if p < q:
            return 0j
        return self.num.lead / self.den.lead

    def __call__(self, z):
        if np.ndim(z):
            return self.eval_array(z)
        return rmap_eval(self, z)

    def eval_array(self, z):
        """Finite-chart evaluation; poles map to INF."""
        z = np.asarray(z, dtype=complex)
        P = self.num(z)
        if self.is_polynomial:
            return P / self.den.coeffs[0]
        Q = self.den(z)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = P / Q
        return np.where(Q == 0, INF, out)

    def deriv_array(self, z):
        """Complex derivative on finite, non-pole points."""
        z = np.asarray(z, dtype=complex)
        if self.is_polynomial:
            return self._wnum(z) / self.den.coeffs[0] ** 2
        Q = self.den(z)
        with np.errstate(divide="ignore", invalid="ignore"):
            return self._wnum(z) / (Q * Q)

    def spherical_norm_array(self, z):
        """|f'(z)| (1+|z|^2) / (1+|f(z)|^2) on finite points of moderate size."""
        z = np.asarray(z, dtype=complex)
        P = self.num(z)
        Q = self.den(z) if not self.is_polynomial else np.full(z.shape, self.den.coeffs[0])
        W = self._wnum(z)
        # |W| (1+|z|^2) / (|Q|^2 + |P|^2) avoids the pole singularity
        return np.abs(W) * (1.0 + np.abs(z) ** 2) / (np.abs(Q) ** 2 + np.abs(P) ** 2)

    def critical_points(self) -> RootSet:
        return critical_points(self)

    def preimages(self, w, tol: float = DEFAULT_TOL) -> RootSet:
        return preimages(self, w, tol)


def rmap_eval(f: RationalMap, z) -> complex:
    """Evaluate f at a point of the sphere, switching charts for large |z|."""
    if is_inf(z):
        return f.value_at_infinity()
    z = complex(z)
    if abs(z) > CHART_SWITCH:
        w = 1.0 / z
        p, q = f.num.degree, f.den.degree
        top = complex(np.polyval(f.num.coeffs, w))  # sum a_k w^(p-k)
        bot = complex(np.polyval(f.den.coeffs, w))
        if bot == 0:
            return INF
        ratio = top / bot
        if ratio == 0:
            return 0j
        logmag = (p - q) * math.log(abs(z)) + math.log(abs(ratio))
        if logmag > 700:
            return INF
        return ratio * z ** (p - q)
    Q = f.den(z)
    P = f.num(z)
    if Q == 0:
        return INF
    out = P / Q
    if is_inf(out):
        return INF
    return out


def rmap_derivative(f: RationalMap, z, metric: str = "euclidean") -> Derivative:
    """Complex derivative of f at z together with its Euclidean or spherical norm."""
    if metric not in ("euclidean", "spherical"):
        raise ValueError(f"unknown metric {metric!r}")
    if metric == "euclidean":
        if is_inf(z):
            raise PoleDerivative("euclidean derivative undefined at infinity")
        z = complex(z)
        Q = f.den(z)
        if Q == 0 or is_inf(rmap_eval(f, z)):
            raise PoleDerivative(f"euclidean derivative requested at pole {z}")
        val = complex(f._wnum(z) / (Q * Q))
        return Derivative(val, abs(val))

    if is_inf(z) or abs(complex(z)) > CHART_SWITCH:
        u = 0j if is_inf(z) else 1.0 / complex(z)
        F = f.chart_conjugate()
        norm = float(F.spherical_norm_array(np.array([u]))[0])
        val = complex("nan")
        if not is_inf(z):
            try:
                val = rmap_derivative(f, z, "euclidean").value
            except (PoleDerivative, OverflowError, ZeroDivisionError):
                pass
        return Derivative(val, norm)
    z = complex(z)
    norm = float(f.spherical_norm_array(np.array([z]))[0])
    Q = f.den(z)
    val = complex(f._wnum(z) / (Q * Q)) if Q != 0 else complex("nan")
    return Derivative(val, norm)


def critical_points(f: RationalMap) -> RootSet:
    """Critical points with multiplicity (local degree minus one), INF included."""
    W = f._wnum
    finite: list[tuple[complex, int]] = []
    if W.degree >= 1:
        finite = list(poly_roots(W).roots)
    at_inf = 2 * f.degree - 2 - sum(m for _, m in finite)
    if at_inf > 0:
        finite.append((INF, at_inf))
    return RootSet(tuple(finite))


def critical_values(f: RationalMap) -> list[complex]:
    return [rmap_eval(f, c) for c, _ in critical_points(f).roots]


def preimages(f: RationalMap, w, tol: float = DEFAULT_TOL) -> RootSet:
    """Solve f(z) = w on the sphere, counting multiplicity."""
    d = f.degree
    if is_inf(w):
        eq = Polynomial(f.den.coeffs)
    else:
        w = complex(w)
        if abs(w) > CHART_SWITCH:
            eq = Polynomial((f.den - (1.0 / w) * f.num).coeffs, trim_tol=1e-14)
        else:
            eq = Polynomial((f.num - w * f.den).coeffs, trim_tol=1e-14)
    roots: list[tuple[complex, int]] = []
    if eq.degree >= 1:
        roots = list(poly_roots(eq, tol=tol).roots)
    missing = d - sum(m for _, m in roots)
    if missing > 0:
        roots.append((INF, missing))
    return RootSet(tuple(roots))


def preimage_batch(f: RationalMap, w: np.ndarray):
    """Raw preimages of many finite targets: ``(roots (M, d), ok (M,))``.

    Multiplicities are not resolved here; a k-fold root appears k times.
    Rows where the equation drops degree (w equal to f(INF)) are flagged
    not-ok and must be handled by :func:`preimages`.
    """
    w = np.asarray(w, dtype=complex)
    d = f.degree
    P = f.num.padded(d + 1)
    Q = f.den.padded(d + 1)
    coeffs = P[None, :] - w[:, None] * Q[None, :]
    lead_ok = np.abs(coeffs[:, -1]) > 1e-13 * np.max(np.abs(coeffs), axis=1)
    safe = coeffs.copy()
    safe[~lead_ok, -1] = 1.0
    roots, ok = aberth_batch(safe)
    return roots, ok & lead_ok
