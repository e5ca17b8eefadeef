"""Words over the generator alphabet, the skew product and backward trees.

Words are tuples of 1-based generator indices stored first-applied-first:
``compose_apply(f, (1, 2), z) == f2(f1(z))``.  Descending one level in a
preimage tree prepends a symbol: a node ``(tau, x)`` has children
``((j,) + tau, y)`` with ``f_j(y) == x``.
"""
from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import BudgetExceeded, EmptyWord
from .rational import (
    Derivative,
    Polynomial,
    RationalMap,
    cluster_roots,
    is_inf,
    preimage_batch,
    preimages,
    rmap_derivative,
    rmap_eval,
)

Word = tuple


@dataclass(frozen=True, eq=False)
class MultiMap:
    generators: tuple
    labels: tuple | None = None

    def __post_init__(self):
        gens = tuple(self.generators)
        if len(gens) < 2:
            raise ValueError("a multi-map needs at least two generators")
        for g in gens:
            if not isinstance(g, RationalMap):
                raise TypeError(f"generator {g!r} is not a RationalMap")
        object.__setattr__(self, "generators", gens)
        if self.labels is not None:
            labels = tuple(self.labels)
            if len(labels) != len(gens):
                raise ValueError("labels must match generators")
            object.__setattr__(self, "labels", labels)

    @property
    def u(self) -> int:
        return len(self.generators)

    @property
    def degrees(self) -> list[int]:
        return [g.degree for g in self.generators]

    @property
    def total_degree(self) -> int:
        return sum(self.degrees)

    def __getitem__(self, j: int) -> RationalMap:
        """1-based generator access, matching word symbols."""
        if not 1 <= j <= self.u:
            raise IndexError(f"generator index {j} outside 1..{self.u}")
        return self.generators[j - 1]

    def __len__(self):
        return self.u

    def to_json(self) -> dict:
        out = {"generators": [g.to_json() for g in self.generators]}
        if self.labels is not None:
            out["labels"] = list(self.labels)
        return out

    @classmethod
    def from_json(cls, data) -> "MultiMap":
        gens = tuple(RationalMap.from_json(g) for g in data["generators"])
        return cls(gens, data.get("labels"))

    def digest(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def check_word(f: MultiMap, word: Sequence[int]) -> Word:
    w = tuple(int(s) for s in word)
    for s in w:
        if not 1 <= s <= f.u:
            raise ValueError(f"symbol {s} outside alphabet 1..{f.u}")
    return w


def compose_apply(f: MultiMap, word: Sequence[int], z):
    """f_word(z) with word[0] applied first."""
    for s in check_word(f, word):
        z = rmap_eval(f[s], z)
    return z


def word_derivative(f: MultiMap, word: Sequence[int], z, metric: str = "euclidean") -> Derivative:
    """Chain-rule derivative of f_word at z and its norm in ``metric``."""
    value = 1 + 0j
    norm = 1.0
    for s in check_word(f, word):
        d = rmap_derivative(f[s], z, metric)
        value *= d.value
        norm *= d.norm
        z = rmap_eval(f[s], z)
    return Derivative(value, norm)


def skew_step(f: MultiMap, state):
    """One step of the skew product: (w1 w2 ..., z) -> (w2 ..., f_w1(z))."""
    word, z = state
    word = tuple(word)
    if not word:
        raise EmptyWord("skew product needs a nonempty prefix")
    return word[1:], rmap_eval(f[word[0]], z)


# ---------------------------------------------------------------------------
# Preimage trees
# ---------------------------------------------------------------------------

@dataclass
class PruningPolicy:
    """``exhaustive`` keeps every branch up to ``budget`` nodes in total;
    ``beam`` keeps a uniform subsample of at most ``beam`` nodes per level,
    reweighting the survivors so level sums stay unbiased."""

    mode: str = "exhaustive"
    budget: int = 2 ** 24
    beam: int = 4096
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("exhaustive", "beam"):
            raise ValueError(f"unknown pruning mode {self.mode!r}")
        if self.budget < 1 or self.beam < 1:
            raise ValueError("budget and beam must be positive")


@dataclass
class TreeLevel:
    points: np.ndarray
    norm: np.ndarray      # |f_tau'(x)| in the tree metric
    mult: np.ndarray      # multiplicity of x as a root of f_tau(x) = z0
    weight: np.ndarray    # importance weight (1 unless beam pruning kicked in)
    parent: np.ndarray    # index into previous level
    symbol: np.ndarray    # 0-based generator index of the first letter

    def __len__(self):
        return self.points.size


@dataclass(frozen=True)
class PreimageNode:
    word: Word
    point: complex
    cum_deriv_norm: float
    multiplicity_weight: int
    importance_weight: float
    level: int
    index: int
    parent: int


@dataclass
class PreimageTree:
    multimap: MultiMap
    root: complex
    levels: list
    metric: str
    policy: PruningPolicy
    diagnostics: dict = field(default_factory=dict)

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    @property
    def sampled(self) -> bool:
        return self.diagnostics.get("pruned_levels", 0) > 0

    def words(self, level: int) -> np.ndarray:
        """(count, level) array of 1-based symbols, first-applied-first."""
        n = len(self.levels[level])
        out = np.zeros((n, level), dtype=np.int16)
        idx = np.arange(n)
        for k in range(level, 0, -1):
            lv = self.levels[k]
            out[:, level - k] = lv.symbol[idx] + 1
            idx = lv.parent[idx]
        return out

    def word(self, level: int, index: int) -> Word:
        out = []
        for k in range(level, 0, -1):
            lv = self.levels[k]
            out.append(int(lv.symbol[index]) + 1)
            index = int(lv.parent[index])
        return tuple(out)

    def node(self, level: int, index: int) -> PreimageNode:
        lv = self.levels[level]
        return PreimageNode(
            word=self.word(level, index),
            point=complex(lv.points[index]),
            cum_deriv_norm=float(lv.norm[index]),
            multiplicity_weight=int(lv.mult[index]),
            importance_weight=float(lv.weight[index]),
            level=level,
            index=index,
            parent=int(lv.parent[index]),
        )

    def iter_nodes(self, level: int) -> Iterable[PreimageNode]:
        for i in range(len(self.levels[level])):
            yield self.node(level, i)

    def weighted_count(self, level: int) -> float:
        lv = self.levels[level]
        return float(np.sum(lv.mult * lv.weight))

    def write_csv(self, fh, levels: Iterable[int] | None = None):
        """Levelwise export: level, word, re, im, deriv_norm, weight."""
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(["level", "word", "re", "im", "deriv_norm", "weight"])
        for k in (range(self.depth + 1) if levels is None else levels):
            lv = self.levels[k]
            words = self.words(k)
            for i in range(len(lv)):
                writer.writerow([
                    k,
                    "".join(f"{s}." for s in words[i]).rstrip("."),
                    repr(float(lv.points[i].real)),
                    repr(float(lv.points[i].imag)),
                    repr(float(lv.norm[i])),
                    repr(float(lv.mult[i] * lv.weight[i])),
                ])


def _step_norm(g: RationalMap, y: np.ndarray, metric: str) -> np.ndarray:
    if metric == "euclidean":
        return np.abs(g.deriv_array(y))
    return g.spherical_norm_array(y)


def _min_pair_gap(roots: np.ndarray) -> np.ndarray:
    d = roots.shape[1]
    if d == 1:
        return np.full(roots.shape[0], np.inf)
    gap = np.full(roots.shape[0], np.inf)
    for a in range(d):
        for b in range(a + 1, d):
            scale = np.maximum(1.0, np.maximum(np.abs(roots[:, a]), np.abs(roots[:, b])))
            gap = np.minimum(gap, np.abs(roots[:, a] - roots[:, b]) / scale)
    return gap


def _preimages_of_level(g: RationalMap, pts: np.ndarray, diag: dict):
    """Preimages under one generator of every point in ``pts``.

    Returns (parent_index, point, multiplicity) arrays in parent order.
    """
    roots, ok = preimage_batch(g, pts)
    d = g.degree
    gap = _min_pair_gap(roots)
    special = ~ok | (gap <= 1e-3)
    regular = np.nonzero(~special)[0]
    par = [np.repeat(regular, d)]
    pts_out = [roots[regular].ravel()]
    mult = [np.ones(regular.size * d, dtype=np.int64)]
    for i in np.nonzero(special)[0]:
        w = complex(pts[i])
        if ok[i]:
            eq = Polynomial((g.num - w * g.den).coeffs)
            groups = cluster_roots(roots[i], poly=eq)
        else:
            groups = list(preimages(g, w).roots)
        for y, m in groups:
            if is_inf(y):
                diag["dropped_infinite"] = diag.get("dropped_infinite", 0) + m
                continue
            if m > 1:
                diag["critical_hits"] = diag.get("critical_hits", 0) + 1
            par.append(np.array([i]))
            pts_out.append(np.array([y], dtype=complex))
            mult.append(np.array([m], dtype=np.int64))
    par = np.concatenate(par)
    pts_out = np.concatenate(pts_out)
    mult = np.concatenate(mult)
    order = np.argsort(par, kind="stable")
    return par[order], pts_out[order], mult[order]


def expected_nodes(f: MultiMap, depth: int) -> int:
    D = f.total_degree
    return sum(D ** k for k in range(depth + 1))


def build_preimage_tree(f: MultiMap, z0, depth: int, policy: PruningPolicy | None = None,
                        metric: str = "euclidean") -> PreimageTree:
    """All (word, preimage) pairs of z0 down to ``depth``, or a reweighted
    beam subsample of them."""
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    if metric not in ("euclidean", "spherical"):
        raise ValueError(f"unknown metric {metric!r}")
    policy = policy or PruningPolicy()
    if policy.mode == "exhaustive":
        need = expected_nodes(f, depth)
        if need > policy.budget:
            raise BudgetExceeded(f"exhaustive tree needs {need} nodes > budget {policy.budget}")
    z0 = complex(z0)
    if is_inf(z0):
        raise ValueError("tree root must be a finite point")
    diag: dict = {"pruned_levels": 0, "critical_hits": 0, "dropped_infinite": 0}
    levels = [TreeLevel(
        points=np.array([z0]), norm=np.ones(1), mult=np.ones(1, dtype=np.int64),
        weight=np.ones(1), parent=np.full(1, -1, dtype=np.int64), symbol=np.full(1, -1, dtype=np.int8),
    )]
    seeds = np.random.SeedSequence(policy.seed).spawn(max(depth, 1))
    for k in range(depth):
        prev = levels[-1]
        chunks = []
        for j, g in enumerate(f.generators):
            par, y, m = _preimages_of_level(g, prev.points, diag)
            step = _step_norm(g, y, metric)
            chunks.append(TreeLevel(
                points=y,
                norm=prev.norm[par] * step,
                mult=prev.mult[par] * m,
                weight=prev.weight[par],
                parent=par,
                symbol=np.full(y.size, j, dtype=np.int8),
            ))
        lv = TreeLevel(*(np.concatenate([getattr(c, name) for c in chunks])
                         for name in ("points", "norm", "mult", "weight", "parent", "symbol")))
        if policy.mode == "beam" and len(lv) > policy.beam:
            rng = np.random.default_rng(seeds[k])
            keep = np.sort(rng.choice(len(lv), size=policy.beam, replace=False))
            factor = len(lv) / policy.beam
            lv = TreeLevel(lv.points[keep], lv.norm[keep], lv.mult[keep],
                           lv.weight[keep] * factor, lv.parent[keep], lv.symbol[keep])
            diag["pruned_levels"] += 1
        levels.append(lv)
    diag["zero_norm_nodes"] = int(sum(np.count_nonzero(lv.norm == 0) for lv in levels))
    return PreimageTree(f, z0, levels, metric, policy, diag)


# ---------------------------------------------------------------------------
# Random backward orbits
# ---------------------------------------------------------------------------

def _pick_preimage(g: RationalMap, z: complex, rng: np.random.Generator) -> complex:
    roots = [(y, m) for y, m in preimages(g, z).roots if not is_inf(y)]
    mult = np.array([m for _, m in roots], dtype=float)
    i = rng.choice(len(roots), p=mult / mult.sum())
    return roots[i][0]


def sample_backward_orbit(f: MultiMap, z0, length: int, seed: int = 0) -> list:
    """Chaos-game backward orbit: uniform generator, then a preimage chosen
    with probability proportional to its multiplicity."""
    if length < 1:
        raise ValueError("length must be at least 1")
    rng = np.random.default_rng(seed)
    z = complex(z0)
    out = []
    for _ in range(length):
        j = int(rng.integers(f.u))
        z = _pick_preimage(f.generators[j], z, rng)
        out.append(z)
    return out


def backward_chains(f: MultiMap, starts: np.ndarray, steps: int, seed: int = 0) -> np.ndarray:
    """Run many independent backward orbits at once; returns (steps, K).

    Choosing one raw root out of d (a k-fold root appears k times) is the
    same as multiplicity-weighted choice among distinct preimages.
    """
    rng = np.random.default_rng(seed)
    z = np.asarray(starts, dtype=complex).copy()
    K = z.size
    out = np.empty((steps, K), dtype=complex)
    for n in range(steps):
        gens = rng.integers(f.u, size=K)
        picks = rng.random(K)
        new = np.empty(K, dtype=complex)
        for j, g in enumerate(f.generators):
            sel = np.nonzero(gens == j)[0]
            if sel.size == 0:
                continue
            roots, ok = preimage_batch(g, z[sel])
            col = np.minimum((picks[sel] * g.degree).astype(int), g.degree - 1)
            chosen = roots[np.arange(sel.size), col]
            for i in np.nonzero(~ok)[0]:
                chosen[i] = _pick_preimage(g, complex(z[sel[i]]), rng)
            new[sel] = chosen
        z = new
        out[n] = z
    return out
