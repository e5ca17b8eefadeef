"""The twelve acceptance criteria, one test each.

Each test prints a ``criterion N: PASS|FAIL`` line (also repeated in the
terminal summary) before asserting, so a run shows every verdict.
"""
import json
import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE
from ratsemigroup.catalog import family_c0, get_example
from ratsemigroup.cli import main
from ratsemigroup.conditions import check_osc, koebe_check
from ratsemigroup.errors import ForbiddenPair, PoleDerivative
from ratsemigroup.julia import approximate_julia, box_count_dimension
from ratsemigroup.measure import build_conformal_atoms, conformality_residual, geometric_ratio_report, project_measure
from ratsemigroup.pressure import (bowen_root, critical_exponent_estimate, log_level_sum, pressure_estimate,
                                   transfer_sum)
from ratsemigroup.rational import RationalMap, chordal, preimages, rmap_derivative, rmap_eval
from ratsemigroup.words import MultiMap, build_preimage_tree, compose_apply, word_derivative

H = math.log(2) / math.log(3)
Z = 1 + 1j   # pm2 base point, well away from the real postcritical set


def verdict(k, ok, detail):
    line = f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    ACCEPTANCE[k] = line
    assert ok, line


@pytest.fixture(scope="module")
def pm2():
    return get_example("pm2").multimap


@pytest.fixture(scope="module")
def pm2_tree(pm2):
    return build_preimage_tree(pm2, Z, 11)


def test_criterion_01_bowen_root_oracle():
    t0 = time.perf_counter()
    h2 = bowen_root(get_example("cantor3").multimap, 0.5, 10).h
    h3 = bowen_root(get_example("cantor3x3").multimap, 0.5, 9).h
    dt = time.perf_counter() - t0
    ok = abs(h2 - H) <= 1e-3 and abs(h3 - 1) <= 1e-3 and dt < 10
    verdict(1, ok, f"h(cantor3)={h2:.10f} (target {H:.10f}), h(three thirds)={h3:.6f}, {dt:.2f}s")


def test_criterion_02_counting(pm2, pm2_tree):
    errs = [abs(transfer_sum(pm2, Z, 0.0, n, tree=pm2_tree) / 4 ** n - 1) for n in range(1, 9)]
    verdict(2, max(errs) <= 1e-9, f"max relative error of L_0^n 1 vs 4^n over n=1..8: {max(errs):.2e}")


def test_criterion_03_pressure_bracket(pm2, pm2_tree):
    p0 = pressure_estimate(pm2, Z, 0.0, [10], tree=pm2_tree).headline
    p2 = pressure_estimate(pm2, Z, 2.0, [10], tree=pm2_tree).headline
    ok = p0 >= math.log(2) - 0.05 and p2 <= 0.10
    verdict(3, ok, f"P_10(0)={p0:.6f} (>= {math.log(2) - 0.05:.4f}), P_10(2)={p2:.6f} (<= 0.10)")


def test_criterion_04_convexity(pm2, pm2_tree):
    ts = np.linspace(0, 2, 9)
    worst = math.inf
    for n in (4, 8):
        v = log_level_sum(pm2_tree, n, ts) / n
        worst = min(worst, float(np.min(v[:-2] - 2 * v[1:-1] + v[2:])))
    verdict(4, worst >= -1e-9, f"min second difference over n in {{4, 8}}: {worst:.3e}")


def test_criterion_05_dimension_consistency(pm2, pm2_tree):
    h = bowen_root(pm2, Z, 10, tree=pm2_tree).h
    cloud = approximate_julia(pm2, "chaos_game", length=1_000_000, seed=0)
    slope = box_count_dimension(cloud).slope
    crit = critical_exponent_estimate(pm2, Z, np.linspace(0, 2, 201), 10, tree=pm2_tree)
    ok = abs(h - slope) <= 0.15 and h < 2 - 1e-3 and abs(crit - h) <= 0.05
    verdict(5, ok, f"bowen={h:.5f}, boxcount={slope:.5f}, critical exponent={crit:.2f}")


def test_criterion_06_boxcount_cantor():
    cloud = approximate_julia(get_example("cantor3").multimap, "chaos_game", length=1_000_000, seed=0)
    fit = box_count_dimension(cloud)
    ok = abs(fit.slope - H) <= 0.05 and fit.r2 >= 0.99
    verdict(6, ok, f"slope={fit.slope:.5f} (target {H:.5f}), r2={fit.r2:.5f}")


def test_criterion_07_conformal_measure(pm2, pm2_tree):
    f = get_example("cantor3").multimap
    s, N = 0.05, 12
    nu = build_conformal_atoms(f, 0.5, H, s, N)
    q = 2 * 3 ** -H * math.exp(-s)
    tail = q ** (N + 1) / sum(q ** n for n in range(1, N + 1))
    res_c = conformality_residual(nu, f)
    ok_c = abs(nu.total_mass - 1) <= 1e-12 and abs(res_c - tail) <= 1e-10

    h = bowen_root(pm2, Z, 10, tree=pm2_tree).h
    P = pressure_estimate(pm2, Z, h, [10], tree=pm2_tree).headline
    sp = P + 0.05
    mu = build_conformal_atoms(pm2, Z, h, sp, 10, tree=pm2_tree)
    bound = math.exp(-sp * 11) * transfer_sum(pm2, Z, h, 11, tree=pm2_tree) / math.exp(mu.log_norm)
    res_p = conformality_residual(mu, pm2)
    ok_p = abs(mu.total_mass - 1) <= 1e-12 and res_p <= bound * (1 + 1e-12)
    verdict(7, ok_c and ok_p,
            f"cantor3: mass-1={nu.total_mass - 1:.1e}, residual={res_c:.12f} vs tail {tail:.12f}; "
            f"pm2: mass-1={mu.total_mass - 1:.1e}, residual={res_p:.6e} <= bound {bound:.6e}")


def test_criterion_08_geometric_measure():
    f = get_example("cantor3").multimap
    nu = build_conformal_atoms(f, 0.5, H, 0.05, 12)
    m = project_measure(nu)
    cloud = approximate_julia(f, "full_tree", depth=12)
    centers = cloud.points[np.random.default_rng(0).choice(len(cloud), 50, replace=False)]
    radii = np.geomspace(1e-3, 1e-1, 9)
    matched = geometric_ratio_report(m, H, centers, radii).spread
    mismatched = geometric_ratio_report(m, H + 0.2, centers, radii).spread
    ok_a = matched <= 50
    ok_b = mismatched >= 5 * matched
    verdict(8, ok_a and ok_b,
            f"matched spread={matched:.3f} (<= 50: {'ok' if ok_a else 'no'}); "
            f"mismatched spread={mismatched:.3f}, factor {mismatched / matched:.3f} (>= 5: {'ok' if ok_b else 'no'})")


def test_criterion_09_osc():
    pm2 = get_example("pm2")
    rep = check_osc(pm2.multimap, pm2.region, grid=1000, mc=100_000, bounds=(-3, 3, -3, 3))
    dup = get_example("dup")
    rep_dup = check_osc(dup.multimap, dup.region, grid=400, mc=10_000)
    ok = (rep.osc1_violations == 0 and rep.osc2_violations == 0 and rep.osc3_alpha >= 0.1
          and rep_dup.osc2_violations > 0)
    verdict(9, ok, f"pm2 osc1={rep.osc1_violations} osc2={rep.osc2_violations} alpha={rep.osc3_alpha:.3f} "
                   f"({rep.mc_samples} samples); dup osc2={rep_dup.osc2_violations}")


def test_criterion_10_family_c0():
    a = family_c0(2, 3, 0.5)
    b = family_c0(3, 2, 1)
    try:
        family_c0(2, 2, 1)
        rejected = False
    except ForbiddenPair:
        rejected = True
    ok = abs(a / 2 ** -22 - 1) <= 1e-12 and abs(b / 2 ** -8 - 1) <= 1e-12 and rejected
    verdict(10, ok, f"c0(2,3,0.5)={a!r}, c0(3,2,1)={b!r}, (2,2) rejected={rejected}")


def _random_map(rng):
    while True:
        dp, dq = int(rng.integers(1, 5)), int(rng.integers(0, 5))
        num = rng.normal(size=dp + 1) + 1j * rng.normal(size=dp + 1)
        den = rng.normal(size=dq + 1) + 1j * rng.normal(size=dq + 1)
        try:
            return RationalMap(num, den)
        except ValueError:
            continue


def _cli_outputs(tmp_path, command, cfg, name):
    out = tmp_path / name
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(cfg))
    code = main([command, "--config", str(path), "--out", str(out)])
    files = {p.name: p.read_bytes() for p in sorted(out.iterdir()) if p.name != "timings.json"}
    return code, files


def test_criterion_11_property_suites(pm2, tmp_path):
    rng = np.random.default_rng(11)
    # chain rule
    f = MultiMap((RationalMap([0.3, 1j, 1], [1, 0.2]), RationalMap.poly([-1, 0.5, 1])))
    chain_err = 0.0
    for _ in range(10_000):
        word = tuple(int(s) for s in rng.integers(1, 3, int(rng.integers(1, 7))))
        z = complex(rng.normal(), rng.normal())
        try:
            d = word_derivative(f, word, z).norm
        except PoleDerivative:
            continue
        prod, x = 1.0, z
        for s in word:
            prod *= rmap_derivative(f[s], x).norm
            x = rmap_eval(f[s], x)
        if prod > 0 and math.isfinite(prod):
            chain_err = max(chain_err, abs(d / prod - 1))
    # preimage multiplicity sums
    mult_bad = 0
    for _ in range(10_000):
        g = _random_map(rng)
        if preimages(g, complex(rng.normal(), rng.normal())).total != g.degree:
            mult_bad += 1
    # forward replay
    tr = build_preimage_tree(pm2, Z, 8)
    words = tr.words(8)
    idx = rng.choice(len(tr.levels[8]), 2000, replace=False)
    replay = max(chordal(compose_apply(pm2, tuple(words[i]), tr.levels[8].points[i]), Z) for i in idx)
    # CLI reproducibility
    small = {"method": "chaos_game", "length": 20000}
    runs = [("render", {"render": {"cloud": small}}),
            ("dimension", {"multimap": "cantor3", "dimension": {"n_range": [6], "cloud": small}}),
            ("measure", {"multimap": "cantor3", "measure": {"N": 6, "cloud": small}}),
            ("check", {"multimap": "cantor3", "check": {"grid": 100, "mc": 2000, "cloud": small}}),
            ("family-c0", {}), ("list-examples", {})]
    repro = all(_cli_outputs(tmp_path, c, cfg, f"{c}-a") == _cli_outputs(tmp_path, c, cfg, f"{c}-b")
                for c, cfg in runs)
    ok = chain_err <= 1e-9 and mult_bad == 0 and replay <= 1e-8 and repro
    verdict(11, ok, f"chain rule max rel err={chain_err:.1e}; multiplicity failures={mult_bad}/10000; "
                    f"max replay distance={replay:.1e}; CLI byte-identical={repro}")


def test_criterion_12_koebe(pm2):
    rng = np.random.default_rng(12)
    cloud = approximate_julia(pm2, "chaos_game", length=10_000, seed=12)
    total_bad = 0
    checked = 0
    while checked < 100:
        z = complex(cloud.points[rng.integers(len(cloud))])
        n = int(rng.integers(1, 5))
        tree = build_preimage_tree(pm2, z, n)
        i = int(rng.integers(len(tree.levels[n])))
        node = tree.node(n, i)
        kc = koebe_check(pm2, node.word, z, node.point, samples=200)
        if not (kc.branch_radius > 0 and kc.r < kc.branch_radius):
            continue
        total_bad += kc.violations
        checked += 1
    verdict(12, total_bad == 0, f"{checked} branches x 200 boundary samples, violations={total_bad}")
