"""Command-line front end: generate nets/spiderwebs/grids, verify, sweep.

Subcommands: generate, verify, sweep, basis-constant, grid-verify.  Config
comes from an optional JSON file plus --key value overrides; every report
records the seed and the resolved config and is written as JSON (machine)
and optionally CSV (tables).  Exit codes: 0 all checks pass, 1 a check
failed (witnesses in the report), 2 usage error, 3 parse error.
LIPNET_THREADS caps worker parallelism for the chunked loops.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from .geometry import Ambient, NormKind
from .grid_fdd import default_grid_space, enumerate_grid, load_grid, save_grid
from .nets import (
    NetParams,
    ParseError,
    Spiderweb,
    build_spiderweb_base,
    load_net,
    load_spiderweb,
    random_separated_net,
    save_net,
    save_spiderweb,
)
from .suites import (
    free_space_suite,
    grid_exact_suite,
    grid_family_suite,
    grid_griddability_suite,
    grid_proximity_suite,
    net_transfer_suite,
    spiderweb_suite,
)
from .retract_fd import build_fd_family, build_ordered_net

SCHEMA_VERSION = 1


class UsageError(ValueError):
    pass


def _positive(value, name):
    if value is None or value <= 0:
        raise UsageError(f"{name} must be positive")
    return value


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"config {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ParseError(f"config {path}: expected a JSON object")
    return cfg


def _merge(args, cfg, key, cast=None):
    """Flag wins over config file wins over parser default."""
    val = getattr(args, key.replace("-", "_"), None)
    if val is None and key in cfg:
        val = cfg[key]
    return cast(val) if (cast and val is not None) else val


def _write_report(path, command, seed, config, reports):
    doc = {
        "schema_version": SCHEMA_VERSION,
        "tool": "lipnet",
        "command": command,
        "seed": seed,
        "config": config,
        "reports": {name: rep.to_dict() for name, rep in reports.items()},
        "all_pass": all(rep.all_pass for rep in reports.values()),
        "skipped": sorted(
            {e.mode for rep in reports.values() for e in rep.entries
             if e.mode != "exact"}
        ),
    }
    text = json.dumps(doc, indent=2, sort_keys=True)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    return doc


def _write_csv(path, reports):
    if not path:
        return
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["suite", "check", "measured", "bound", "passed", "mode"])
        for name, rep in reports.items():
            for e in rep.entries:
                w.writerow([name, e.name, repr(e.measured),
                            "" if e.bound is None else repr(e.bound),
                            int(e.passed), e.mode])


def _echo(reports):
    for name, rep in reports.items():
        for e in rep.entries:
            status = "PASS" if e.passed else "FAIL"
            bound = "" if e.bound is None else f" bound={e.bound:.6g}"
            print(f"[{status}] {name}/{e.name}: measured={e.measured:.6g}{bound} ({e.mode})")


# ---------------------------------------------------------------------------
# subcommands


def cmd_generate(args):
    cfg = _load_config(args.config)
    kind = NormKind(_merge(args, cfg, "norm") or "LINF")
    dim = _merge(args, cfg, "dim", int) or 2
    a = _merge(args, cfg, "a", float)
    a = 1.0 if a is None else a
    seed = _merge(args, cfg, "seed", int) or 0
    mesh = _merge(args, cfg, "mesh", float)
    _positive(a, "a")
    _positive(dim, "dim")
    out = args.out
    if out is None:
        raise UsageError("--out is required")

    if args.kind == "spiderweb":
        max_shell = _merge(args, cfg, "max-shell", int) or 4
        _positive(max_shell, "max-shell")
        base = build_spiderweb_base(dim, kind, a=a, max_shell=max_shell, mesh=mesh)
        web = Spiderweb(base=base, extra_points=[], params=base.params)
        save_spiderweb(out, web)
        print(f"wrote spiderweb: dim={dim} norm={kind.value} a={a} "
              f"shells<={max_shell} points={len(web.point_set())} -> {out}")
    elif args.kind == "net":
        radius = _merge(args, cfg, "radius", float) or 8.0
        b = _merge(args, cfg, "b", float) or 2.0 * a
        _positive(radius, "radius")
        pts = random_separated_net(dim, kind, a, radius, seed)
        save_net(out, pts, kind, NetParams(a, b))
        print(f"wrote net: dim={dim} norm={kind.value} (a,b)=({a},{b}) "
              f"radius={radius} points={len(pts)} seed={seed} -> {out}")
    elif args.kind == "grid":
        blocks = _merge(args, cfg, "blocks", int) or 2
        max_norm = _merge(args, cfg, "max-norm", int) or 4
        ambient = Ambient.SUP_SUM if (_merge(args, cfg, "ambient") or "SUP") == "SUP" \
            else Ambient.L1_SUM
        _positive(blocks, "blocks")
        _positive(max_norm, "max-norm")
        space = default_grid_space(blocks, dim, kind, a=a, max_shell=max_norm,
                                   mesh=mesh, ambient=ambient)
        pts = enumerate_grid(space, (max_norm,) * blocks)
        save_grid(out, space, pts, (max_norm,) * blocks)
        print(f"wrote grid: blocks={blocks} dim={dim} norm={kind.value} "
              f"ambient={ambient.value} max_norm={max_norm} points={len(pts)} -> {out}")
    else:
        raise UsageError(f"unknown kind {args.kind!r}")
    return 0


def cmd_verify(args):
    cfg = _load_config(args.config)
    seed = _merge(args, cfg, "seed", int) or 0
    n_samples = _merge(args, cfg, "samples", int) or 10_000
    with open(args.input) as fh:
        head = fh.readline()
    reports = {}
    config = {"input": args.input, "samples": n_samples}
    if "layer=" in head or "base_a=" in head:
        web = load_spiderweb(args.input)
        rep, _, _ = spiderweb_suite(web, seed=seed, n_samples=n_samples)
        reports["spiderweb"] = rep
    else:
        pts, kind, params = load_net(args.input)
        rep, _, _, _ = net_transfer_suite(pts, kind, params, seed=seed)
        reports["net-transfer"] = rep
    _echo(reports)
    _write_report(args.report, "verify", seed, config, reports)
    _write_csv(args.csv, reports)
    return 0 if all(r.all_pass for r in reports.values()) else 1


def cmd_sweep(args):
    cfg = _load_config(args.config)
    seed = _merge(args, cfg, "seed", int) or 0
    dims = [int(d) for d in (args.dims or cfg.get("dims", "1,2,3")).split(",")]
    if not dims:
        raise UsageError("dims must be nonempty")
    kind = NormKind(_merge(args, cfg, "norm") or "LINF")
    a = _merge(args, cfg, "a", float)
    a = 1.0 if a is None else a
    max_shell = _merge(args, cfg, "max-shell", int) or 8
    mesh = _merge(args, cfg, "mesh", float)
    n_samples = _merge(args, cfg, "samples", int) or 10_000
    rows, reports = [], {}
    failed = False
    for dim in dims:
        try:
            base = build_spiderweb_base(dim, kind, a=a, max_shell=max_shell, mesh=mesh)
            web = Spiderweb(base=base, extra_points=[], params=base.params)
            rep, net, fam = spiderweb_suite(web, seed=seed, n_samples=n_samples)
            reports[f"dim{dim}"] = rep
            rows.append({
                "dimension": dim,
                "points": len(net.points),
                "measured_K": rep.meta["family_constant"],
                "paper_bound": fam.theoretical_bound,
                "max_radial_gap": rep.meta["radial_gap"],
                "all_pass": int(rep.all_pass),
            })
            failed |= not rep.all_pass
        except Exception as exc:  # per-dim failures recorded, sweep continues
            rows.append({"dimension": dim, "points": 0, "measured_K": "",
                         "paper_bound": "", "max_radial_gap": "",
                         "all_pass": 0, "error": str(exc)})
            failed = True
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["dimension", "points", "measured_K",
                                               "paper_bound", "max_radial_gap",
                                               "all_pass", "error"])
            w.writeheader()
            for r in rows:
                w.writerow(r)
    for r in rows:
        print(r)
    _write_report(args.report, "sweep", seed,
                  {"dims": dims, "norm": kind.value, "a": a,
                   "max_shell": max_shell}, reports)
    return 1 if failed else 0


def cmd_basis_constant(args):
    cfg = _load_config(args.config)
    seed = _merge(args, cfg, "seed", int) or 0
    n_points = _merge(args, cfg, "points", int) or 40
    molecules = _merge(args, cfg, "molecules", int) or 500
    web = load_spiderweb(args.input)
    net = build_ordered_net(web)
    fam = build_fd_family(net)
    if n_points > len(fam.points):
        raise UsageError(f"net has only {len(fam.points)} points")
    rep = free_space_suite(fam, n_points=n_points, molecules=molecules, seed=seed)
    reports = {"free-space": rep}
    _echo(reports)
    print(f"basis-constant estimate: {rep.meta['estimate']:.6g} "
          f"(family constant {rep.meta['family_constant']:.6g})")
    _write_report(args.report, "basis-constant", seed,
                  {"input": args.input, "points": n_points,
                   "molecules": molecules}, reports)
    _write_csv(args.csv, reports)
    return 0 if rep.all_pass else 1


def cmd_grid_verify(args):
    cfg = _load_config(args.config)
    seed = _merge(args, cfg, "seed", int) or 0
    suites = (args.suite or cfg.get("suite", "exact,proximity,family,griddability")).split(",")
    radius = _merge(args, cfg, "radius", float) or 3.0
    n_samples = _merge(args, cfg, "samples", int) or 10_000
    family_budget = _merge(args, cfg, "family-norm-budget", int) or 2
    space, pts, max_norms = load_grid(args.input)
    reports = {}
    if "exact" in suites:
        reports["exact"] = grid_exact_suite(space, pts)
    if "proximity" in suites:
        reports["proximity"] = grid_proximity_suite(space, pts, seed=seed)
    if "family" in suites:
        caps = tuple(min(family_budget, m) for m in max_norms)
        fam_pts = enumerate_grid(space, caps)
        reports["family"] = grid_family_suite(space, fam_pts, seed=seed)
    if "griddability" in suites:
        reports["griddability"] = grid_griddability_suite(space, pts, radius=radius,
                                                          n_samples=n_samples, seed=seed)
    if not reports:
        raise UsageError(f"no known suites in {suites!r}")
    _echo(reports)
    _write_report(args.report, "grid-verify", seed,
                  {"input": args.input, "suites": suites}, reports)
    _write_csv(args.csv, reports)
    return 0 if all(r.all_pass for r in reports.values()) else 1


# ---------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="lipnet", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config file; flags override it")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--report", help="write JSON report here")
        sp.add_argument("--csv", help="write CSV summary here")

    g = sub.add_parser("generate", help="generate a net, spiderweb or grid file")
    common(g)
    g.add_argument("--kind", choices=["spiderweb", "net", "grid"], default="spiderweb")
    g.add_argument("--out", required=False)
    g.add_argument("--dim", type=int, default=None)
    g.add_argument("--norm", choices=[k.value for k in NormKind], default=None)
    g.add_argument("--a", type=float, default=None)
    g.add_argument("--b", type=float, default=None)
    g.add_argument("--mesh", type=float, default=None)
    g.add_argument("--max-shell", type=int, default=None)
    g.add_argument("--radius", type=float, default=None)
    g.add_argument("--blocks", type=int, default=None)
    g.add_argument("--max-norm", type=int, default=None)
    g.add_argument("--ambient", choices=["SUP", "L1"], default=None)
    g.set_defaults(func=cmd_generate)

    v = sub.add_parser("verify", help="verify a net or spiderweb file")
    common(v)
    v.add_argument("--input", required=True)
    v.add_argument("--samples", type=int, default=None)
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("sweep", help="dimension sweep of the retraction constant")
    common(s)
    s.add_argument("--dims", default=None, help="comma list, e.g. 1,2,3")
    s.add_argument("--norm", choices=[k.value for k in NormKind], default=None)
    s.add_argument("--a", type=float, default=None)
    s.add_argument("--mesh", type=float, default=None)
    s.add_argument("--max-shell", type=int, default=None)
    s.add_argument("--samples", type=int, default=None)
    s.set_defaults(func=cmd_sweep)

    b = sub.add_parser("basis-constant", help="free-space basis constant estimate")
    common(b)
    b.add_argument("--input", required=True)
    b.add_argument("--points", type=int, default=None)
    b.add_argument("--molecules", type=int, default=None)
    b.set_defaults(func=cmd_basis_constant)

    gv = sub.add_parser("grid-verify", help="run grid suites on a grid file")
    common(gv)
    gv.add_argument("--input", required=True)
    gv.add_argument("--suite", default=None,
                    help="comma list from exact,proximity,family,griddability")
    gv.add_argument("--radius", type=float, default=None)
    gv.add_argument("--samples", type=int, default=None)
    gv.add_argument("--family-norm-budget", type=int, default=None)
    gv.set_defaults(func=cmd_grid_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (ParseError, FileNotFoundError) as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
