"""Transfer-operator sums, pressure estimates, Bowen roots and Poincare series.

Everything here works on a :class:`PreimageTree` built once at the needed
depth; sums for many values of t are then cheap reductions over a level.
Level sums are handled in log space to stay finite for large t and n.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import AllCandidatesRejected, Inconclusive, InfiniteSum, NoBracket
from .rational import critical_values, is_inf
from .words import MultiMap, PreimageTree, PruningPolicy, build_preimage_tree

ESCAPE = 1e6


def _tree_for(f: MultiMap, z, depth: int, tree: PreimageTree | None, policy, metric: str) -> PreimageTree:
    if tree is not None:
        if tree.depth < depth:
            raise ValueError(f"tree depth {tree.depth} < required {depth}")
        return tree
    return build_preimage_tree(f, z, depth, policy, metric)


def log_level_sum(tree: PreimageTree, n: int, t, warn: bool = True) -> np.ndarray:
    """log of sum over level n of weight * |f_w'(x)|^(-t), for each t given."""
    lv = tree.levels[n]
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    logw = np.log(lv.mult * lv.weight)
    zero = lv.norm == 0
    with np.errstate(divide="ignore"):
        logn = np.log(lv.norm)
    out = np.empty(ts.size)
    for i, tv in enumerate(ts):
        if tv == 0:
            out[i] = logsumexp(logw)
            continue
        if zero.any():
            if warn:
                warnings.warn(f"{int(zero.sum())} critical preimages at level {n} excluded from the sum",
                              InfiniteSum, stacklevel=3)
            out[i] = logsumexp(logw[~zero] - tv * logn[~zero]) if (~zero).any() else -np.inf
        else:
            out[i] = logsumexp(logw - tv * logn)
    return out


def transfer_sum(f: MultiMap, z, t: float, n: int, tree: PreimageTree | None = None,
                 policy: PruningPolicy | None = None, metric: str = "euclidean") -> float:
    """Sum over words of length n and preimages x of z of |f_w'(x)|^(-t)."""
    tr = _tree_for(f, z, n, tree, policy, metric)
    return float(np.exp(log_level_sum(tr, n, t)[0]))


@dataclass
class PressureEstimate:
    t: float
    values_by_n: list          # (n, (1/n) log L^n)
    ratio_estimates: list      # (n, log(L^(n+1) / L^n))
    base_point: complex
    metric: str
    pruning_used: bool
    flags: list = field(default_factory=list)

    @property
    def headline(self) -> float:
        return self.ratio_estimates[-1][1]

    @property
    def cesaro(self) -> float:
        return self.values_by_n[-1][1]

    @property
    def spread(self) -> float:
        return abs(self.headline - self.cesaro)

    def to_json(self) -> dict:
        return {
            "t": self.t,
            "values_by_n": [[n, v] for n, v in self.values_by_n],
            "ratio_estimates": [[n, v] for n, v in self.ratio_estimates],
            "headline": self.headline,
            "base_point": [self.base_point.real, self.base_point.imag],
            "metric": self.metric,
            "pruning_used": self.pruning_used,
            "flags": list(self.flags),
        }


def _estimate_from_tree(tree: PreimageTree, t: float, n_range) -> PressureEstimate:
    flags = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        logs = {n: log_level_sum(tree, n, t)[0] for n in sorted(set(n_range) | {m + 1 for m in n_range})}
    if caught:
        flags.append("InfiniteSum")
        warnings.warn(str(caught[0].message), InfiniteSum, stacklevel=3)
    ns = sorted(n_range)
    values = [(n, logs[n] / n) for n in ns]
    ratios = [(n, logs[n + 1] - logs[n]) for n in ns]
    return PressureEstimate(float(t), values, ratios, tree.root, tree.metric, tree.sampled, flags)


def pressure_estimate(f: MultiMap, z, t: float, n_range, policy: PruningPolicy | None = None,
                      metric: str = "euclidean", tree: PreimageTree | None = None) -> PressureEstimate:
    """Cesaro and successive-ratio estimates of P(t) at every n in ``n_range``.

    The headline value is the ratio estimate at the largest n, which needs
    one extra tree level.
    """
    n_range = sorted(int(n) for n in n_range)
    if not n_range or n_range[0] < 1:
        raise ValueError("n_range must contain positive integers")
    tr = _tree_for(f, z, n_range[-1] + 1, tree, policy, metric)
    return _estimate_from_tree(tr, t, n_range)


@dataclass
class BowenRootResult:
    h: float
    bracket: tuple
    n_used: int
    residual: float
    h_cesaro: float
    diagnostics: list

    @property
    def width(self) -> float:
        """Disagreement between the ratio-based and Cesaro-based roots."""
        return abs(self.h - self.h_cesaro)

    def to_json(self) -> dict:
        return {
            "h": self.h,
            "bracket": list(self.bracket),
            "n_used": self.n_used,
            "residual": self.residual,
            "h_cesaro": self.h_cesaro,
            "width": self.width,
            "diagnostics": [d.to_json() for d in self.diagnostics],
        }


def _bisect(fun, lo: float, hi: float, tol: float):
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if fun(mid) > 0:
            lo = mid
        else:
            hi = mid
    return lo, hi


def bowen_root(f: MultiMap, z, n: int, tol_t: float = 1e-6, policy: PruningPolicy | None = None,
               metric: str = "euclidean", tree: PreimageTree | None = None,
               t_lo: float = 0.0, t_hi: float = 2.0) -> BowenRootResult:
    """Zero of the headline pressure estimate, found by bisection on [t_lo, t_hi].

    Raises ``NoBracket`` when the estimate does not change sign on the
    interval; the caller decides what to do about it.
    """
    if n < 1:
        raise ValueError("n must be positive")
    tr = _tree_for(f, z, n + 1, tree, policy, metric)

    def headline(t):
        a, b = log_level_sum(tr, n, t, warn=False)[0], log_level_sum(tr, n + 1, t, warn=False)[0]
        return b - a

    def cesaro(t):
        return log_level_sum(tr, n, t, warn=False)[0] / n

    p_lo, p_hi = headline(t_lo), headline(t_hi)
    if not (p_lo > 0 and p_hi <= 0):
        raise NoBracket(f"headline pressure {p_lo:.4g} at t={t_lo}, {p_hi:.4g} at t={t_hi}", p_lo, p_hi)
    lo, hi = _bisect(headline, t_lo, t_hi, tol_t)
    h = 0.5 * (lo + hi)
    if cesaro(t_lo) > 0 and cesaro(t_hi) <= 0:
        c_lo, c_hi = _bisect(cesaro, t_lo, t_hi, tol_t)
        h_c = 0.5 * (c_lo + c_hi)
    else:
        h_c = float("nan")
    diag = [_estimate_from_tree(tr, h, range(1, n + 1))]
    return BowenRootResult(h, (lo, hi), n, abs(headline(h)), h_c, diag)


@dataclass
class PoincareResult:
    t: float
    terms: list           # (n, L^n)
    partial_sums: list    # (n, sum_{k<=n} L^k)
    decay_ratio: float
    diverges: bool

    def to_json(self) -> dict:
        return {"t": self.t, "partial_sums": [[n, s] for n, s in self.partial_sums],
                "decay_ratio": self.decay_ratio, "diverges": self.diverges}


def _decay_ratio(logs: np.ndarray) -> float:
    """Geometric-mean term ratio over the second half of the terms."""
    N = logs.size
    m = max(1, N // 2)
    if N - m < 1:
        return float("nan")
    return float(np.exp((logs[N - 1] - logs[m - 1]) / (N - m)))


def poincare_partial_sums(f: MultiMap, z, t: float, N: int, policy: PruningPolicy | None = None,
                          metric: str = "euclidean", tree: PreimageTree | None = None,
                          margin: float = 1e-3) -> PoincareResult:
    """Cumulative sums of L^n 1(z), n = 1..N, and a divergence flag."""
    if N < 2:
        raise ValueError("need N >= 2 terms to judge decay")
    tr = _tree_for(f, z, N, tree, policy, metric)
    logs = np.array([log_level_sum(tr, n, t)[0] for n in range(1, N + 1)])
    terms = np.exp(logs)
    sums = np.cumsum(terms)
    ratio = _decay_ratio(logs)
    return PoincareResult(float(t), [(n, float(v)) for n, v in zip(range(1, N + 1), terms)],
                          [(n, float(s)) for n, s in zip(range(1, N + 1), sums)],
                          ratio, not ratio < 1 - margin)


def critical_exponent_estimate(f: MultiMap, z, t_grid, N: int, margin: float = 1e-3,
                               policy: PruningPolicy | None = None, metric: str = "euclidean",
                               tree: PreimageTree | None = None) -> float:
    """Smallest grid t at which the Poincare terms decay geometrically."""
    grid = np.sort(np.asarray(t_grid, dtype=float))
    if grid.size < 2 or grid[0] > 1e-12 or grid[-1] < 2 - 1e-12:
        raise ValueError("t_grid must span [0, 2]")
    tr = _tree_for(f, z, N, tree, policy, metric)
    for t in grid:
        logs = np.array([log_level_sum(tr, n, t, warn=False)[0] for n in range(1, N + 1)])
        if _decay_ratio(logs) < 1 - margin:
            return float(t)
    raise Inconclusive("Poincare terms do not decay anywhere on the grid")


@dataclass
class BasePoint:
    point: complex
    score: float
    scores: list


def postcritical_sample(f: MultiMap, depth: int = 6) -> np.ndarray:
    """Forward images of all finite critical values under words of length <= depth."""
    cur = []
    for g in f.generators:
        cur.extend(v for v in critical_values(g) if not is_inf(v) and abs(v) < ESCAPE)
    seen = {}
    frontier = np.array(cur, dtype=complex)
    for k in range(depth + 1):
        if frontier.size == 0:
            break
        for v in frontier:
            seen.setdefault((round(v.real, 10), round(v.imag, 10)), complex(v))
        if k == depth:
            break
        nxt = []
        for g in f.generators:
            with np.errstate(all="ignore"):
                img = g.eval_array(frontier)
            nxt.append(img[np.isfinite(img) & (np.abs(img) < ESCAPE)])
        frontier = np.unique(np.round(np.concatenate(nxt), 10))
    return np.array(list(seen.values()), dtype=complex)


def base_point_select(f: MultiMap, candidates, depth: int = 6, reject_below: float = 1e-4) -> BasePoint:
    """Candidate farthest from the sampled postcritical set."""
    cands = [complex(c) for c in candidates]
    if not cands:
        raise ValueError("no candidate base points given")
    pcs = postcritical_sample(f, depth)
    if pcs.size == 0:
        return BasePoint(cands[0], math.inf, [math.inf] * len(cands))
    scores = [float(np.min(np.abs(pcs - c))) for c in cands]
    best = int(np.argmax(scores))
    if scores[best] < reject_below:
        raise AllCandidatesRejected("every candidate lies on the sampled postcritical set")
    return BasePoint(cands[best], scores[best], scores)
