import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ratsemigroup.catalog import poly_map
from ratsemigroup.errors import BudgetExceeded, EmptyWord, PoleDerivative
from ratsemigroup.rational import RationalMap, chordal, rmap_derivative, rmap_eval
from ratsemigroup.words import (MultiMap, PruningPolicy, backward_chains, build_preimage_tree, compose_apply,
                                sample_backward_orbit, skew_step, word_derivative)


def test_multimap_needs_two_generators():
    with pytest.raises(ValueError):
        MultiMap((poly_map(0, 0, 1),))


def test_multimap_json_roundtrip(pm2):
    g = MultiMap.from_json(pm2.to_json())
    assert g.generators == pm2.generators
    assert g.digest() == pm2.digest()
    assert pm2.total_degree == 4


def test_compose_apply_order(pm2):
    assert compose_apply(pm2, (1, 2), 0) == 2
    assert compose_apply(pm2, (), 0.7) == 0.7


def test_symbol_out_of_range(pm2):
    with pytest.raises(ValueError):
        compose_apply(pm2, (3,), 0)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(1, 2), max_size=4), st.lists(st.integers(1, 2), max_size=4),
       st.complex_numbers(max_magnitude=1.5, allow_nan=False, allow_infinity=False))
def test_concatenation_identity(tau, omega, z):
    from ratsemigroup.catalog import get_example

    f = get_example("pm2").multimap
    assert compose_apply(f, tuple(tau) + tuple(omega), z) == compose_apply(f, omega, compose_apply(f, tau, z))


def test_word_derivative_examples(pm2, cantor3):
    assert word_derivative(pm2, (1, 2), 0).value == 0
    assert word_derivative(pm2, (1,), 1).value == 2
    for n in range(1, 6):
        assert word_derivative(cantor3, (1, 2) * n, 0.3).norm == pytest.approx(9.0 ** n, rel=1e-14)


def test_word_derivative_pole():
    f = MultiMap((RationalMap([1], [0, 1]), poly_map(0, 0, 1)))
    with pytest.raises(PoleDerivative):
        word_derivative(f, (2, 1), 0)
    assert math.isfinite(word_derivative(f, (2, 1), 0, "spherical").norm)


def test_chain_rule_random(rng):
    """10^4 random (word, point) pairs: norm equals the product of step norms."""
    gens = (RationalMap([0.3, 1j, 1], [1, 0.2]), poly_map(-1, 0.5, 1), RationalMap([1, 0, 0, 1], [0, 0, 2]))
    f = MultiMap(gens)
    for _ in range(10_000):
        n = int(rng.integers(1, 7))
        word = tuple(int(s) for s in rng.integers(1, 4, n))
        z = complex(rng.normal(), rng.normal())
        metric = "spherical" if rng.random() < 0.5 else "euclidean"
        try:
            d = word_derivative(f, word, z, metric)
        except PoleDerivative:
            continue
        prod = 1.0
        x = z
        for s in word:
            prod *= rmap_derivative(f[s], x, metric).norm
            x = rmap_eval(f[s], x)
        if prod == 0 or not math.isfinite(prod):
            assert d.norm == prod or (math.isnan(d.norm) and math.isnan(prod))
            continue
        assert d.norm == pytest.approx(prod, rel=1e-9)


def test_skew_step(pm2):
    assert skew_step(pm2, ((1, 2, 1), 0)) == ((2, 1), 2)
    assert skew_step(pm2, ((2,), 1)) == ((), -1)
    with pytest.raises(EmptyWord):
        skew_step(pm2, ((), 1))


def test_skew_iterates_compose(pm2, rng):
    word = tuple(int(s) for s in rng.integers(1, 3, 5))
    state = (word, 0.3 + 0.1j)
    for _ in word:
        state = skew_step(pm2, state)
    assert state[1] == compose_apply(pm2, word, 0.3 + 0.1j)


def test_tree_depth_zero(pm2):
    tr = build_preimage_tree(pm2, 0.5, 0)
    assert tr.depth == 0 and len(tr.levels[0]) == 1
    assert tr.levels[0].weight[0] == 1


def test_tree_cantor_level_two(cantor3):
    tr = build_preimage_tree(cantor3, 0.5, 2)
    pts = sorted(tr.levels[2].points.real)
    assert np.allclose(pts, sorted([0.5 / 9, (0.5 + 2) / 9, (0.5 / 3 + 2) / 3, ((0.5 + 2) / 3 + 2) / 3]))
    for i in range(4):
        node = tr.node(2, i)
        assert abs(compose_apply(cantor3, node.word, node.point) - 0.5) < 1e-14


def test_tree_pm2_level_one(pm2):
    tr = build_preimage_tree(pm2, 3, 1)
    got = {(tr.word(1, i), round(tr.levels[1].points[i].real, 12)) for i in range(4)}
    r5 = round(math.sqrt(5), 12)
    assert got == {((1,), 1.0), ((1,), -1.0), ((2,), r5), ((2,), -r5)}


def test_tree_counts_and_replay(pm2):
    z0 = 0.3 + 1.1j
    tr = build_preimage_tree(pm2, z0, 8)
    for n in range(9):
        assert tr.weighted_count(n) == 4 ** n
    words = tr.words(8)
    lv = tr.levels[8]
    worst = 0.0
    for i in range(0, len(lv), 97):
        worst = max(worst, chordal(compose_apply(pm2, tuple(words[i]), lv.points[i]), z0))
        d = word_derivative(pm2, tuple(words[i]), lv.points[i]).norm
        assert lv.norm[i] == pytest.approx(d, rel=1e-9)
    assert worst < 1e-8


def test_tree_full_replay_vectorised(pm2):
    """Every node of a depth-7 tree maps forward to the root."""
    z0 = -0.4 + 0.9j
    tr = build_preimage_tree(pm2, z0, 7)
    for n in range(1, 8):
        words = tr.words(n)
        z = tr.levels[n].points.copy()
        for k in range(n):
            sym = words[:, k]
            out = np.empty_like(z)
            for j in (1, 2):
                sel = sym == j
                out[sel] = pm2[j].eval_array(z[sel])
            z = out
        d = 2 * np.abs(z - z0) / np.sqrt((1 + np.abs(z) ** 2) * (1 + abs(z0) ** 2))
        assert d.max() < 1e-8


def test_tree_critical_value_multiplicity(pm2):
    # -2 = f_2(0): the preimage 0 under z^2 - 2 is double
    tr = build_preimage_tree(pm2, -2, 1)
    assert tr.weighted_count(1) == 4
    assert sorted(tr.levels[1].mult.tolist()) == [1, 1, 2]
    assert tr.diagnostics["critical_hits"] >= 1


def test_budget_exceeded(pm2):
    with pytest.raises(BudgetExceeded):
        build_preimage_tree(pm2, 0.5, 10, PruningPolicy(budget=1000))


def test_beam_reweights(pm2):
    tr = build_preimage_tree(pm2, 0.3 + 1.1j, 9, PruningPolicy("beam", beam=256, seed=1))
    assert tr.sampled
    assert all(len(lv) <= 256 for lv in tr.levels)
    assert tr.weighted_count(9) == pytest.approx(4 ** 9)


def test_beam_deterministic(pm2):
    a = build_preimage_tree(pm2, 0.3 + 1.1j, 8, PruningPolicy("beam", beam=100, seed=5))
    b = build_preimage_tree(pm2, 0.3 + 1.1j, 8, PruningPolicy("beam", beam=100, seed=5))
    assert np.array_equal(a.levels[8].points, b.levels[8].points)


def test_tree_csv(cantor3):
    tr = build_preimage_tree(cantor3, 0.5, 2)
    buf = io.StringIO(newline="")
    tr.write_csv(buf)
    lines = buf.getvalue().split("\r\n")
    assert lines[0] == "level,word,re,im,deriv_norm,weight"
    assert len([ln for ln in lines if ln]) == 1 + 1 + 2 + 4
    assert any(ln.startswith("2,1.2,") or ln.startswith("2,2.1,") for ln in lines)


def test_backward_orbit_cantor(cantor3):
    orbit = sample_backward_orbit(cantor3, 0.5, 200, seed=3)
    tail = np.array(orbit[20:])
    assert np.all((tail.real >= -1e-12) & (tail.real <= 1 + 1e-12))
    assert np.all(np.abs(tail.imag) < 1e-12)
    assert orbit == sample_backward_orbit(cantor3, 0.5, 200, seed=3)


def test_backward_orbit_single_step():
    f = MultiMap((poly_map(0, 0, 1), poly_map(0, 0, 1)))
    (z,) = sample_backward_orbit(f, 4, 1, seed=0)
    assert min(abs(z - 2), abs(z + 2)) < 1e-12


def test_backward_chains_deterministic(pm2):
    a = backward_chains(pm2, np.full(8, 2 + 0j), 30, seed=9)
    b = backward_chains(pm2, np.full(8, 2 + 0j), 30, seed=9)
    assert np.array_equal(a, b)
    assert np.all(np.abs(a[10:]) <= 2 + 1e-9)
