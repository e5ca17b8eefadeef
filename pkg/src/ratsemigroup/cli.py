"""Command-line front end.

Every run reads one JSON config (optional; defaults fill the rest), writes
its artifacts to ``--out`` and a ``report.json`` echoing the fully resolved
config.  Feeding that echo back through ``--config`` repeats the run.
Wall-clock timings go to ``timings.json`` so that every other output is
byte-identical across repeated runs.

Exit codes: 0 success, 2 config/schema error, 3 numerical failure,
4 check failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import math
import platform
import sys
import time
import warnings
from dataclasses import MISSING, asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .catalog import Region, builtin_examples, family_c0, get_example
from .conditions import check_osc, check_semihyperbolicity
from .errors import (BudgetExceeded, EmptyCloud, NoBracket, NonConvergence, RatSemigroupError,
                     SeriesNotDecaying, UnknownName)
from .julia import Viewport, approximate_julia, box_count_dimension, rasterize, seed_point
from .measure import build_conformal_atoms, conformality_residual, geometric_ratio_report, project_measure
from .pressure import base_point_select, bowen_root, critical_exponent_estimate
from .words import MultiMap, PruningPolicy, build_preimage_tree

EXIT_OK, EXIT_SCHEMA, EXIT_NUMERIC, EXIT_CHECK = 0, 2, 3, 4


class SchemaError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Config schema
# ---------------------------------------------------------------------------

@dataclass
class PolicyConfig:
    mode: str = "exhaustive"
    budget: int = 2 ** 24
    beam: int = 4096

    def validate(self, where):
        _choice(self.mode, ("exhaustive", "beam"), where + ".mode")
        _posint(self.budget, where + ".budget")
        _posint(self.beam, where + ".beam")


@dataclass
class CloudConfig:
    method: str = "chaos_game"
    length: int = 1_000_000
    depth: int = 10
    burn_in: int = 20
    chains: int = 256
    budget: int = 2 ** 24

    def validate(self, where):
        _choice(self.method, ("chaos_game", "full_tree"), where + ".method")
        for k in ("length", "depth", "chains", "budget"):
            _posint(getattr(self, k), f"{where}.{k}")
        _nonnegint(self.burn_in, where + ".burn_in")


@dataclass
class ViewportConfig:
    center: list = field(default_factory=lambda: [0.0, 0.0])
    half_width: float = 2.2
    half_height: float = 2.2
    pixels_x: int = 512
    pixels_y: int = 512

    def validate(self, where):
        _point(self.center, where + ".center")
        try:
            self.build()
        except ValueError as exc:
            raise SchemaError(f"{where}: {exc}") from None

    def build(self) -> Viewport:
        return Viewport(complex(*self.center), self.half_width, self.half_height, self.pixels_x, self.pixels_y)


@dataclass
class RenderConfig:
    cloud: CloudConfig = field(default_factory=CloudConfig)
    viewport: ViewportConfig = field(default_factory=ViewportConfig)


@dataclass
class DimensionConfig:
    n_range: list = MISSING
    base_point: list | None = None
    tol_t: float = 1e-6
    metric: str = "euclidean"
    t_grid_step: float = 0.01
    margin: float = 1e-3
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    cloud: CloudConfig = field(default_factory=CloudConfig)

    def validate(self, where):
        if not isinstance(self.n_range, list) or not self.n_range:
            raise SchemaError(f"{where}.n_range must be a nonempty list of positive integers")
        for n in self.n_range:
            _posint(n, where + ".n_range[]")
        if self.base_point is not None:
            _point(self.base_point, where + ".base_point")
        _positive(self.tol_t, where + ".tol_t")
        _choice(self.metric, ("euclidean", "spherical"), where + ".metric")
        _positive(self.t_grid_step, where + ".t_grid_step")
        _positive(self.margin, where + ".margin")


@dataclass
class MeasureConfig:
    N: int = 10
    xi: list | None = None
    t: float | None = None
    s: float = 0.05
    metric: str = "euclidean"
    centers: int = 50
    radii: list = field(default_factory=lambda: [1e-3, 1e-1, 9])
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    cloud: CloudConfig = field(default_factory=CloudConfig)

    def validate(self, where):
        _posint(self.N, where + ".N")
        if self.xi is not None:
            _point(self.xi, where + ".xi")
        if self.t is not None:
            _number(self.t, where + ".t")
        _number(self.s, where + ".s")
        _choice(self.metric, ("euclidean", "spherical"), where + ".metric")
        _posint(self.centers, where + ".centers")
        if not (isinstance(self.radii, list) and len(self.radii) == 3):
            raise SchemaError(f"{where}.radii must be [r_min, r_max, count]")
        _positive(self.radii[0], where + ".radii[0]")
        _positive(self.radii[1], where + ".radii[1]")
        _posint(self.radii[2], where + ".radii[2]")


@dataclass
class CheckConfig:
    region: dict | None = None
    expect_pass: bool | None = None
    grid: int = 1000
    mc: int = 100_000
    n_centers: int = 50
    semihyp_depth: int = 10
    dist_tol: float = 1e-2
    cloud: CloudConfig = field(default_factory=CloudConfig)

    def validate(self, where):
        if self.region is not None:
            try:
                Region.from_json(self.region)
            except (KeyError, TypeError, ValueError) as exc:
                raise SchemaError(f"{where}.region: {exc}") from None
        if self.expect_pass is not None and not isinstance(self.expect_pass, bool):
            raise SchemaError(f"{where}.expect_pass must be a boolean")
        for k in ("grid", "mc", "n_centers", "semihyp_depth"):
            _posint(getattr(self, k), f"{where}.{k}")
        _positive(self.dist_tol, where + ".dist_tol")


@dataclass
class FamilyConfig:
    d1: int = 2
    d: int = 3
    r: float = 0.5

    def validate(self, where):
        _posint(self.d1, where + ".d1")
        _posint(self.d, where + ".d")
        _number(self.r, where + ".r")


@dataclass
class RunConfig:
    multimap: object = "pm2"
    seed: int = 0
    workers: int = 1
    render: RenderConfig = field(default_factory=RenderConfig)
    dimension: DimensionConfig | None = None
    measure: MeasureConfig = field(default_factory=MeasureConfig)
    check: CheckConfig = field(default_factory=CheckConfig)
    family_c0: FamilyConfig = field(default_factory=FamilyConfig)

    def validate(self, where="config"):
        if not isinstance(self.multimap, (str, dict)):
            raise SchemaError("multimap must be a catalog name or an inline generator object")
        _nonnegint(self.seed, "seed")
        _posint(self.workers, "workers")


def _number(v, where):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise SchemaError(f"{where} must be a finite number, got {v!r}")


def _positive(v, where):
    _number(v, where)
    if v <= 0:
        raise SchemaError(f"{where} must be positive, got {v!r}")


def _posint(v, where):
    if isinstance(v, bool) or not isinstance(v, int) or v < 1:
        raise SchemaError(f"{where} must be a positive integer, got {v!r}")


def _nonnegint(v, where):
    if isinstance(v, bool) or not isinstance(v, int) or v < 0:
        raise SchemaError(f"{where} must be a nonnegative integer, got {v!r}")


def _choice(v, options, where):
    if v not in options:
        raise SchemaError(f"{where} must be one of {list(options)}, got {v!r}")


def _point(v, where):
    if not (isinstance(v, list) and len(v) == 2):
        raise SchemaError(f"{where} must be [re, im]")
    _number(v[0], where)
    _number(v[1], where)


def _dataclass_type(tp):
    """The dataclass named by a field annotation such as ``X`` or ``X | None``."""
    if isinstance(tp, str):
        name = tp.split("|")[0].strip()
        return _SECTIONS.get(name)
    return tp if dataclasses.is_dataclass(tp) else None


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise SchemaError(f"{where} must be an object")
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(names))
    if unknown:
        raise SchemaError(f"{where}: unknown key(s) {unknown}")
    kwargs = {}
    for name, fld in names.items():
        sub = _dataclass_type(fld.type)
        if name in data:
            val = data[name]
            if sub is not None and val is not None:
                val = _build(sub, val, f"{where}.{name}")
            kwargs[name] = val
        elif fld.default is MISSING and fld.default_factory is MISSING:
            raise SchemaError(f"{where}: missing required key {name!r}")
    obj = cls(**kwargs)
    if hasattr(obj, "validate"):
        obj.validate(where)
    return obj


_SECTIONS = {c.__name__: c for c in (PolicyConfig, CloudConfig, ViewportConfig, RenderConfig, DimensionConfig,
                                     MeasureConfig, CheckConfig, FamilyConfig, RunConfig)}


def load_config(data: dict, command: str) -> RunConfig:
    cfg = _build(RunConfig, data, "config")
    if command == "dimension" and cfg.dimension is None:
        raise SchemaError("config.dimension: block with n_range is required")
    for name in ("render", "dimension", "measure", "check"):
        block = getattr(cfg, name)
        if block is not None:
            for sub in ("cloud", "viewport", "policy"):
                if hasattr(block, sub):
                    getattr(block, sub).validate(f"config.{name}.{sub}")
    return cfg


def resolve_multimap(spec) -> tuple[MultiMap, object]:
    """(multimap, catalog entry or None)."""
    if isinstance(spec, str):
        try:
            entry = get_example(spec)
        except UnknownName as exc:
            raise SchemaError(str(exc.args[0])) from None
        return entry.multimap, entry
    try:
        return MultiMap.from_json(spec), None
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"inline multimap: {exc}") from None


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------

def _clean(obj):
    """JSON-safe copy: complex -> [re, im], numpy scalars -> Python, non-finite -> string."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [_clean(obj.real), _clean(obj.imag)]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isfinite(v):
            return v
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    return obj


def write_json(path: Path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_clean(obj), fh, sort_keys=True, indent=2, ensure_ascii=False)
        fh.write("\n")


class Run:
    """Collects results, warnings and timings for one command."""

    def __init__(self, command: str, cfg: RunConfig, out: Path):
        self.command = command
        self.cfg = cfg
        self.out = out
        self.results = {}
        self.warnings = []
        self.timings = {}
        self.files = []

    def warn(self, kind: str, message: str):
        item = {"kind": kind, "message": message}
        if item not in self.warnings:
            self.warnings.append(item)

    def timed(self, label, fn, *args, **kwargs):
        t0 = time.perf_counter()
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            try:
                return fn(*args, **kwargs)
            finally:
                for w in caught:
                    self.warn(w.category.__name__, str(w.message))
                self.timings[label] = self.timings.get(label, 0.0) + time.perf_counter() - t0

    def path(self, name: str) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        self.files.append(name)
        return self.out / name

    def finish(self, status: str, error: str | None = None):
        import scipy

        report = {
            "command": self.command,
            "config": asdict(self.cfg),
            "versions": {"ratsemigroup": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                         "python": platform.python_version()},
            "results": self.results,
            "warnings": self.warnings,
            "status": status,
            "files": sorted(set(self.files)),
        }
        if error is not None:
            report["error"] = error
        write_json(self.path("report.json"), report)
        write_json(self.out / "timings.json", self.timings)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _cloud(run: Run, f: MultiMap, cc: CloudConfig):
    return run.timed("cloud", approximate_julia, f, cc.method, depth=cc.depth, length=cc.length,
                     burn_in=cc.burn_in, seed=run.cfg.seed, budget=cc.budget, chains=cc.chains)


def _policy(pc: PolicyConfig, seed: int) -> PruningPolicy:
    return PruningPolicy(pc.mode, budget=pc.budget, beam=pc.beam, seed=seed)


def _base_point(run: Run, f: MultiMap, cloud, given) -> complex:
    if given is not None:
        return complex(*given)
    rng = np.random.default_rng(run.cfg.seed)
    sample = cloud.points[rng.choice(len(cloud), size=min(64, len(cloud)), replace=False)]
    cands = [seed_point(f)] + [complex(z) for z in sample]
    bp = run.timed("base_point", base_point_select, f, cands)
    run.results["base_point_score"] = bp.score
    return bp.point


def cmd_render(run: Run, f: MultiMap, entry):
    rc = run.cfg.render
    vp = rc.viewport.build()
    cloud = _cloud(run, f, rc.cloud)
    img = run.timed("rasterize", rasterize, cloud, vp)
    img.write_png(run.path("julia.png"))
    sidecar = {"cloud": cloud.stats(), "seed_point": cloud.seed,
               "viewport": asdict(rc.viewport), "pixel_pitch": vp.pixel_pitch,
               "outside": img.outside, "occupied_pixels": int(np.count_nonzero(img.counts)),
               "max_abs": float(np.max(np.abs(cloud.points)))}
    write_json(run.path("julia.json"), sidecar)
    run.results.update({"png": "julia.png", "sidecar": "julia.json", "points": len(cloud),
                        "occupied_pixels": sidecar["occupied_pixels"]})
    return EXIT_OK


def cmd_dimension(run: Run, f: MultiMap, entry):
    dc = run.cfg.dimension
    n = max(dc.n_range)
    cloud = _cloud(run, f, dc.cloud)
    z = _base_point(run, f, cloud, dc.base_point)
    tree = run.timed("tree", build_preimage_tree, f, z, n + 1, _policy(dc.policy, run.cfg.seed), dc.metric)
    fit = run.timed("boxcount", box_count_dimension, cloud, seed=run.cfg.seed)
    grid = np.round(np.arange(0.0, 2.0 + dc.t_grid_step / 2, dc.t_grid_step), 12)
    grid[-1] = max(grid[-1], 2.0)
    out = {"base_point": z, "boxcount": fit.to_json()}
    status = EXIT_OK
    try:
        out["poincare"] = {"critical_exponent": run.timed("poincare", critical_exponent_estimate, f, z, grid, n,
                                                           margin=dc.margin, tree=tree),
                           "N": n, "t_grid_step": dc.t_grid_step}
    except RatSemigroupError as exc:
        run.warn(type(exc).__name__, str(exc))
        out["poincare"] = None
    roots = {}
    try:
        for m in sorted(set(dc.n_range)):
            res = run.timed("bowen", bowen_root, f, z, m, dc.tol_t, tree=tree)
            roots[m] = res
        out["bowen"] = roots[n].to_json()
        out["bowen"]["by_n"] = [[m, r.h, r.h_cesaro] for m, r in sorted(roots.items())]
    except NoBracket as exc:
        run.warn("NoBracket", str(exc))
        out["bowen"] = None
        status = EXIT_NUMERIC
    write_json(run.path("dimension.json"), out)
    run.results.update({"bowen": roots[n].h if n in roots else None, "boxcount": fit.slope,
                        "poincare": out["poincare"]["critical_exponent"] if out["poincare"] else None})
    return status


def cmd_measure(run: Run, f: MultiMap, entry):
    mc = run.cfg.measure
    cloud = _cloud(run, f, mc.cloud)
    xi = _base_point(run, f, cloud, mc.xi)
    tree = run.timed("tree", build_preimage_tree, f, xi, mc.N + 1, _policy(mc.policy, run.cfg.seed), mc.metric)
    t = mc.t
    if t is None:
        t = run.timed("bowen", bowen_root, f, xi, mc.N, tree=tree).h
        run.results["t_from_bowen_root"] = t
    try:
        nu = run.timed("atoms", build_conformal_atoms, f, xi, t, mc.s, mc.N, tree=tree)
    except SeriesNotDecaying as exc:
        run.warn("SeriesNotDecaying", str(exc))
        raise
    with open(run.path("atoms.csv"), "w", encoding="utf-8", newline="") as fh:
        nu.write_csv(fh)
    m = project_measure(nu)
    rng = np.random.default_rng(run.cfg.seed)
    centers = cloud.points[rng.choice(len(cloud), size=min(mc.centers, len(cloud)), replace=False)]
    radii = np.geomspace(mc.radii[0], mc.radii[1], mc.radii[2])
    rep = run.timed("geometric", geometric_ratio_report, m, t, centers, radii)
    write_json(run.path("geometric.json"), rep.to_json())
    resid = run.timed("residual", conformality_residual, nu, f)
    summary = {"xi": xi, "t": t, "s": mc.s, "N": mc.N, "total_mass": nu.total_mass,
               "level_masses": nu.level_masses, "tail_mass": nu.tail_mass, "residual": resid,
               "atoms": len(nu), "projected_atoms": len(m), "flags": nu.flags, "spread": rep.spread}
    write_json(run.path("measure.json"), summary)
    run.results.update({"t": t, "residual": resid, "tail_mass": nu.tail_mass, "spread": rep.spread,
                        "total_mass": nu.total_mass})
    return EXIT_OK


def cmd_check(run: Run, f: MultiMap, entry):
    cc = run.cfg.check
    if cc.region is not None:
        U = Region.from_json(cc.region)
    elif entry is not None and entry.region is not None:
        U = entry.region
    else:
        raise SchemaError("config.check.region is required for this multimap")
    expect = cc.expect_pass if cc.expect_pass is not None else bool(entry is not None and entry.osc_expected)
    osc = run.timed("osc", check_osc, f, U, grid=cc.grid, mc=cc.mc, seed=run.cfg.seed, n_centers=cc.n_centers)
    cloud = _cloud(run, f, cc.cloud)
    sh = run.timed("semihyp", check_semihyperbolicity, f, cloud, cc.semihyp_depth, cc.dist_tol)
    if sh.verdict == "inconclusive":
        run.warn("Inconclusive", "semi-hyperbolicity verdict is inconclusive")
    write_json(run.path("check.json"), {"osc": osc.to_json(), "semihyp": sh.to_json(), "region": U.to_json(),
                                        "expect_pass": expect})
    run.results.update({"osc_passed": osc.passed, "osc1_violations": osc.osc1_violations,
                        "osc2_violations": osc.osc2_violations, "osc3_alpha": osc.osc3_alpha,
                        "semihyp": sh.verdict, "expect_pass": expect})
    return EXIT_CHECK if (expect and not osc.passed) else EXIT_OK


def cmd_family_c0(run: Run, f, entry):
    fc = run.cfg.family_c0
    value = family_c0(fc.d1, fc.d, fc.r)
    write_json(run.path("family_c0.json"), {"d1": fc.d1, "d": fc.d, "r": fc.r, "c0": value})
    run.results["c0"] = value
    print(repr(value))
    return EXIT_OK


def cmd_list_examples(run: Run, f, entry):
    cat = builtin_examples()
    listing = {name: {"generators": e.multimap.labels, "region": e.region.to_json() if e.region else None,
                      "osc_expected": e.osc_expected, "note": e.note} for name, e in sorted(cat.items())}
    for name, info in listing.items():
        print(f"{name}\t{', '.join(info['generators'])}\t{info['note']}")
    run.results["examples"] = listing
    return EXIT_OK


COMMANDS = {"render": cmd_render, "dimension": cmd_dimension, "measure": cmd_measure, "check": cmd_check,
            "family-c0": cmd_family_c0, "list-examples": cmd_list_examples}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ratsemigroup", description=__doc__.split("\n")[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", type=Path, help="JSON run config (defaults fill missing keys)")
    p.add_argument("--seed", type=int, help="override config seed")
    p.add_argument("--workers", type=int, help="worker count (recorded; computation is vectorised)")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--multimap", help="override config multimap with a catalog name")
    return p


def _numeric_failure(run: Run, exc: Exception) -> int:
    run.warn(type(exc).__name__, str(exc))
    run.finish("numerical-failure", f"{type(exc).__name__}: {exc}")
    print(f"numerical failure: {exc}", file=sys.stderr)
    return EXIT_NUMERIC


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        data = {}
        if args.config is not None:
            try:
                data = json.loads(args.config.read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as exc:
                raise SchemaError(f"cannot read config: {exc}") from None
            if not isinstance(data, dict):
                raise SchemaError("config must be a JSON object")
        for key in ("seed", "workers", "multimap"):
            if getattr(args, key) is not None:
                data[key] = getattr(args, key)
        cfg = load_config(data, args.command)
        f, entry = resolve_multimap(cfg.multimap)
    except SchemaError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    run = Run(args.command, cfg, args.out)
    try:
        code = COMMANDS[args.command](run, f, entry)
    except SchemaError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (NoBracket, NonConvergence, SeriesNotDecaying, BudgetExceeded, EmptyCloud) as exc:
        return _numeric_failure(run, exc)
    except ValueError as exc:
        # domain errors on user-supplied parameters (ForbiddenPair, NonpositiveRadius, ...)
        run.finish("error", f"{type(exc).__name__}: {exc}")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except RatSemigroupError as exc:
        return _numeric_failure(run, exc)
    run.finish("ok" if code == EXIT_OK else ("check-failed" if code == EXIT_CHECK else "numerical-failure"))
    return code


if __name__ == "__main__":
    sys.exit(main())
