import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ratsemigroup.errors import DegreeZero, PoleDerivative
from ratsemigroup.rational import (INF, Polynomial, RationalMap, chordal, critical_points, critical_values,
                                   is_inf, poly_roots, preimage_batch, preimages, rmap_derivative, rmap_eval)


def as_dict(rs, nd=8):
    return {(round(z.real, nd) + 0.0, round(z.imag, nd) + 0.0): m for z, m in rs.roots}


# -- polynomials ------------------------------------------------------------

def test_polynomial_trims_and_degree():
    p = Polynomial([1, 2, 0, 0])
    assert p.degree == 1
    assert list(p.coeffs) == [1, 2]
    assert Polynomial([0]).is_zero


def test_polynomial_arithmetic():
    p = Polynomial([1, 1])
    q = p * p
    assert np.allclose(q.coeffs, [1, 2, 1])
    assert np.allclose((q - p).coeffs, [0, 1, 1])
    assert np.allclose(q.deriv().coeffs, [2, 2])
    assert q(2) == 9


def test_polynomial_json_roundtrip():
    p = Polynomial([1 + 2j, -3, 0.5j])
    assert Polynomial.from_json(p.to_json()) == p
    assert p.to_json()[0] == [1.0, 2.0]


def test_roots_simple():
    assert as_dict(poly_roots(Polynomial([-1, 0, 1]))) == {(1.0, 0.0): 1, (-1.0, 0.0): 1}


def test_roots_double():
    assert as_dict(poly_roots(Polynomial([0, 0, 1]))) == {(0.0, 0.0): 2}


def test_roots_cubic_residual_and_vieta():
    p = Polynomial([2, -2, 0, 1])
    rs = poly_roots(p)
    assert rs.total == 3
    pts = np.array(rs.points)
    assert np.all(np.abs(p(pts)) < 1e-10)
    assert abs(pts.sum()) < 1e-10


@pytest.mark.parametrize("k", [3, 4])
def test_roots_higher_multiplicity(k):
    p = Polynomial([1])
    for _ in range(k):
        p = p * Polynomial([-1, 1])
    assert as_dict(poly_roots(p), 4) == {(1.0, 0.0): k}


def test_roots_constant_rejected():
    with pytest.raises(DegreeZero):
        poly_roots(Polynomial([3]))


def test_random_polynomials_reconstruct(rng):
    """10^4 random polynomials of degree <= 8, coefficients in the unit box."""
    worst = 0.0
    for _ in range(10_000):
        d = int(rng.integers(1, 9))
        c = rng.uniform(-1, 1, d + 1) + 1j * rng.uniform(-1, 1, d + 1)
        if abs(c[-1]) < 1e-3:
            c[-1] = 0.5
        p = Polynomial(c)
        rs = poly_roots(p)
        assert rs.total == d
        q = Polynomial([p.lead])
        for z, m in rs.roots:
            for _ in range(m):
                q = q * Polynomial([-z, 1])
        err = np.max(np.abs(q.coeffs - p.coeffs)) / np.max(np.abs(p.coeffs))
        worst = max(worst, err)
    assert worst < 1e-8


# -- rational maps ----------------------------------------------------------

def test_eval_examples():
    f = RationalMap.poly([2, 0, 1])
    assert rmap_eval(f, 1) == 3
    assert is_inf(rmap_eval(f, INF))
    g = RationalMap([1, 0, 1], [-1, 1])
    assert is_inf(rmap_eval(g, 1))


def test_eval_large_argument_uses_chart():
    f = RationalMap([1, 0, 0, 1], [0, 0, 2])   # (z^3+1)/(2z^2)
    z = 3e7
    assert rmap_eval(f, z) == pytest.approx(z / 2 + 1 / (2 * z * z), rel=1e-12)
    assert rmap_eval(RationalMap([1], [0, 1]), INF) == 0


def test_common_root_rejected():
    with pytest.raises(ValueError):
        RationalMap([-1, 0, 1], [-1, 1])


def test_constant_map_rejected():
    with pytest.raises(ValueError):
        RationalMap([2], [1])


def test_derivative_examples():
    sq = RationalMap.poly([0, 0, 1])
    d = rmap_derivative(sq, 1)
    assert d.value == 2 and d.norm == 2
    assert rmap_derivative(sq, 0, "spherical").norm == 0
    assert rmap_derivative(sq, 2, "spherical").norm == pytest.approx(4 * 5 / 17, rel=1e-12)


def test_derivative_at_pole():
    g = RationalMap([1, 0, 1], [-1, 1])
    with pytest.raises(PoleDerivative):
        rmap_derivative(g, 1)
    with pytest.raises(PoleDerivative):
        rmap_derivative(g, INF)
    assert math.isfinite(rmap_derivative(g, 1, "spherical").norm)
    assert math.isfinite(rmap_derivative(g, INF, "spherical").norm)


def random_map(rng, max_deg=4, rational=True):
    while True:
        dp = int(rng.integers(1, max_deg + 1))
        dq = int(rng.integers(0, max_deg + 1)) if rational else 0
        num = rng.normal(size=dp + 1) + 1j * rng.normal(size=dp + 1)
        den = rng.normal(size=dq + 1) + 1j * rng.normal(size=dq + 1) if dq else np.array([1.0 + 0j])
        try:
            return RationalMap(num, den)
        except ValueError:
            continue


def test_derivative_matches_finite_difference(rng):
    h = 1e-6
    checked = 0
    while checked < 1000:
        f = random_map(rng)
        z = complex(rng.normal(), rng.normal())
        if abs(f.den(z)) < 1e-2:
            continue
        d = rmap_derivative(f, z).value
        fd = (rmap_eval(f, z + h) - rmap_eval(f, z - h)) / (2 * h)
        assert abs(fd - d) <= 1e-5 * max(abs(d), 1.0)
        checked += 1


def test_spherical_norm_chart_invariance(rng):
    for _ in range(500):
        f = random_map(rng)
        z = complex(rng.normal(), rng.normal()) * 3
        if abs(f.den(z)) < 1e-3 or abs(z) < 1e-3:
            continue
        direct = float(f.spherical_norm_array(np.array([z]))[0])
        via = float(f.chart_conjugate().spherical_norm_array(np.array([1 / z]))[0])
        assert via == pytest.approx(direct, rel=1e-9)


def test_critical_points_examples():
    assert as_dict(critical_points(RationalMap.poly([0, 0, 1]))) == {(0.0, 0.0): 1, (math.inf, 0.0): 1}
    assert as_dict(critical_points(RationalMap.poly([-2, 0, 1]))) == {(0.0, 0.0): 1, (math.inf, 0.0): 1}
    lam, b = 0.3 + 0.1j, 0.5 - 1j
    f = RationalMap.poly((Polynomial([lam]) * Polynomial([-b, 1]) * Polynomial([-b, 1]) * Polynomial([-b, 1])
                          + Polynomial([b])).coeffs)
    crit = critical_points(f)
    finite = [(z, m) for z, m in crit.roots if not is_inf(z)]
    assert len(finite) == 1 and abs(finite[0][0] - b) < 1e-4 and finite[0][1] == 2
    assert crit.total == 4


def test_critical_count_rational(rng):
    for _ in range(200):
        f = random_map(rng)
        assert critical_points(f).total == 2 * f.degree - 2


def test_critical_values_pm():
    vals = sorted(v.real for v in critical_values(RationalMap.poly([-2, 0, 1])) if not is_inf(v))
    assert vals == [-2.0]


def test_preimages_examples():
    sq = RationalMap.poly([0, 0, 1])
    assert as_dict(preimages(sq, 4)) == {(2.0, 0.0): 1, (-2.0, 0.0): 1}
    assert as_dict(preimages(sq, 0)) == {(0.0, 0.0): 2}
    assert as_dict(preimages(RationalMap.poly([-2, 0, 1]), 2)) == {(2.0, 0.0): 1, (-2.0, 0.0): 1}


def test_preimages_of_infinity():
    g = RationalMap([1, 0, 1], [-1, 1])
    rs = preimages(g, INF)
    assert rs.total == 2
    assert any(is_inf(z) for z in rs.points)
    assert any(abs(z - 1) < 1e-12 for z in rs.points if not is_inf(z))


def test_preimages_multiplicity_sum_and_accuracy(rng):
    for _ in range(10_000):
        f = random_map(rng)
        w = complex(rng.normal(), rng.normal()) * 2
        rs = preimages(f, w)
        assert rs.total == f.degree
        for y in rs.points:
            assert chordal(rmap_eval(f, y), w) < 1e-8


def test_preimage_batch_matches_scalar(rng):
    f = RationalMap.poly([1 - 1j, 0.3, 0, 1])
    w = rng.normal(size=50) + 1j * rng.normal(size=50)
    roots, ok = preimage_batch(f, w)
    assert ok.all()
    assert np.max(np.abs(f.eval_array(roots) - w[:, None])) < 1e-10


@settings(max_examples=200, deadline=None)
@given(st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
       st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False))
def test_chordal_metric_properties(a, b):
    d = chordal(a, b)
    assert 0 <= d <= 2 + 1e-12
    assert d == pytest.approx(chordal(b, a))
    assert chordal(a, INF) == pytest.approx(2 / math.sqrt(1 + abs(a) ** 2))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False),
                min_size=1, max_size=6))
def test_roots_of_product(zs):
    p = Polynomial([1])
    for z in zs:
        p = p * Polynomial([-z, 1])
    rs = poly_roots(p)
    assert rs.total == len(zs)
    pts = np.array(rs.points)
    assert np.all(np.abs(p(pts)) <= 1e-8 * p.scale(pts) + 1e-10)


def test_compose_matches_nested_evaluation(rng):
    f = RationalMap([1, 2], [0, 0, 1])
    g = RationalMap.poly([-1, 0, 1])
    h = f.compose(g)
    for z in rng.normal(size=20) + 1j * rng.normal(size=20):
        assert rmap_eval(h, z) == pytest.approx(rmap_eval(f, rmap_eval(g, z)), rel=1e-10)


def test_rational_json_roundtrip():
    f = RationalMap([1, 0, 1j], [2, 1])
    g = RationalMap.from_json(f.to_json())
    assert g == f
    assert set(f.to_json()) == {"num", "den"}
