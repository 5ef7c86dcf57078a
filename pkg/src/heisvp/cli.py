"""The ``heisvp`` command.

Subcommands: surface, vper, omega, corona, embed, wordmetric, check.
Exit codes: 0 success, 1 invalid input or guard violation, 2 failed
acceptance criterion in ``check``.  Every output file gets a ``.json``
sidecar with the echoed configuration, library versions and wall time.
Precedence is flags > ``--config`` JSON file > defaults.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import platform
import sys
import time
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__

DEFAULTS = {
    "seed": 0,
    "threads": 1,
    "surface": {"alpha": 2, "rho": "8", "layers": 3, "grid": 2048, "nx": 512, "nz": 512},
    "vper": {"a_min": 0.0, "a_max": 10.0, "steps": None, "q": [2.0, 4.0]},
    "omega": {"R": [8.0], "nsamples": 4096, "m_max": None},
    "corona": {"eta": 0.05, "R": 8.0, "r": 4.0, "depth": 10, "nsamples": 512, "min_width": None},
    "embed": {"k": 2.0**16, "alpha": None, "n": 4, "pairs": 128, "nodes": 64, "angles": 32, "scales": 64,
              "layers": None},
    "wordmetric": {"radius": 4},
}


class ValidationError(Exception):
    pass


def versions() -> dict:
    import numba
    import scipy

    return {"heisvp": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "numba": numba.__version__}


def _default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(type(o).__name__)


def write_sidecar(path, config: dict, started: float, extra: Optional[dict] = None) -> Path:
    """Write ``<path>.json``, merging any sidecar a module already wrote there."""
    side = Path(str(path) + ".json")
    body = {}
    if side.exists():
        try:
            body = json.loads(side.read_text())
        except ValueError:
            body = {}
    body.update({"config": config, "versions": versions(), "wall_time": time.perf_counter() - started})
    if extra:
        body.update(extra)
    side.write_text(json.dumps(body, indent=2, default=_default))
    return side


def threads_from(args) -> int:
    env = os.environ.get("HVP_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValidationError(f"HVP_THREADS must be an integer, got {env!r}")
    else:
        n = int(args.threads)
    if n < 1:
        raise ValidationError("thread count must be positive")
    return n


# ---------------------------------------------------------------------------
# fields and regions


def load_field(source: str):
    """Field from a source string: ``z``, ``zero``, ``affine:c0,cx,cz``, ``bumpy:alpha,rho,layers`` or a file path."""
    from .field import GridField, PolyField

    if source in ("z", "builtin:z"):
        return PolyField.affine(0.0, 0.0, 1.0)
    if source in ("zero", "builtin:zero"):
        return PolyField.constant(0.0)
    if source.startswith("affine:"):
        vals = _floats(source[7:], 3, "affine")
        return PolyField.affine(*vals)
    if source.startswith("bumpy:"):
        from . import bumpy

        a, r, l = _floats(source[6:], 3, "bumpy")
        return bumpy.build(bumpy.BumpyParams(alpha=int(a), rho=int(r), layers=int(l))).field()
    path = Path(source)
    if not path.is_file():
        raise ValidationError(f"cannot read field file {source!r}")
    try:
        if path.suffix == ".csv":
            return GridField.load_csv(path)
        return GridField.load(path)
    except (OSError, ValueError, KeyError) as exc:
        raise ValidationError(f"unreadable field file {source!r}: {exc}")


def _floats(s: str, n: int, what: str) -> List[float]:
    try:
        vals = [float(v) for v in s.split(",")]
    except ValueError:
        raise ValidationError(f"{what} expects {n} comma-separated numbers")
    if len(vals) != n:
        raise ValidationError(f"{what} expects {n} comma-separated numbers")
    return vals


def load_region(source: Optional[str]):
    from .field import QuadRegion

    if source is None:
        return QuadRegion.unit_square()
    x0, x1, z0, z1 = _floats(source, 4, "--region")
    if not (x1 > x0 and z1 > z0):
        raise ValidationError("--region needs x0 < x1 and z0 < z1")
    return QuadRegion.rect(x0, x1, z0, z1)


# ---------------------------------------------------------------------------
# subcommands


def cmd_surface(args, cfg, started):
    from . import bumpy

    if str(cfg["rho"]) == "calibrated":
        cal = bumpy.calibrate()
        params = bumpy.BumpyParams(alpha=int(cfg["alpha"]), rho=cal.rho, layers=int(cfg["alpha"]) ** 4,
                                   eta=cal.eta, r=cal.r, R=cal.R)
        params.layers = min(params.layers, bumpy.feasible_layers(params))
        if cfg["layers"] is not None:
            params.layers = min(params.layers, int(cfg["layers"]))
    else:
        params = bumpy.BumpyParams(alpha=int(cfg["alpha"]), rho=int(cfg["rho"]), layers=cfg["layers"])
    s = bumpy.build(params)
    report = None if args.no_verify else bumpy.verify_internal(s, int(cfg["grid"]))
    out = Path(args.out)
    man = bumpy.save_surface(s, out, int(cfg["nx"]), int(cfg["nz"]), report)
    write_sidecar(man, cfg, started)
    print(f"wrote {man}")


def cmd_vper(args, cfg, started):
    from . import vper

    f = load_field(args.field)
    reg = load_region(args.region)
    p = vper.profile(f, reg, float(cfg["a_min"]), float(cfg["a_max"]), cfg["steps"], threads=threads_from(args))
    out = Path(args.out)
    p.to_csv(out)
    norms = {str(q): vper.lq_norm(p, float(q)) for q in cfg["q"]}
    write_sidecar(out, cfg, started, {"lq_norms": norms})
    print(json.dumps(norms))


def cmd_omega(args, cfg, started):
    from . import nonmono

    f = load_field(args.field)
    reg = load_region(args.region)
    ests = nonmono.omega_p_multi(f, reg, [float(r) for r in cfg["R"]], int(cfg["nsamples"]), int(cfg["seed"]),
                                 cfg["m_max"])
    out = Path(args.out)
    out.write_text(json.dumps([e.to_dict() for e in ests], indent=2, default=_default))
    write_sidecar(out, cfg, started)
    for e in ests:
        print(f"R={e.R:g} omega={e.value:.6g} stderr={e.stderr:.3g}")


def cmd_corona(args, cfg, started):
    from . import corona

    f = load_field(args.field)
    tree = corona.subdivide(f, eta=float(cfg["eta"]), R=float(cfg["R"]), r=float(cfg["r"]),
                            max_depth=int(cfg["depth"]), min_width=cfg["min_width"],
                            nsamples=int(cfg["nsamples"]), seed=int(cfg["seed"]))
    out = Path(args.out)
    tree.to_json(out)
    inv = corona.check_invariants(tree)
    diag = {"nodes": len(tree), "vertical": len(tree.vertical()), "horizontal": len(tree.horizontal()),
            "carleson_ratio": corona.carleson_ratio(tree),
            "invariants": {k: v for k, v in inv.items() if not isinstance(v, list)}}
    if args.vper_bound:
        diag["vper_bound"] = corona.vper_bound_check(tree, f)
    write_sidecar(out, cfg, started, {"diagnostics": diag})
    print(json.dumps(diag, default=_default))


def cmd_embed(args, cfg, started):
    from . import bumpy, embed

    cal = bumpy.calibrate()
    alpha = cfg["alpha"] or embed.auto_alpha(float(cfg["k"]), cal.rho)
    params = bumpy.BumpyParams(alpha=int(alpha), rho=cal.rho, layers=int(alpha) ** 4, eta=cal.eta, r=cal.r, R=cal.R)
    params.layers = min(params.layers, bumpy.feasible_layers(params))
    if cfg["layers"] is not None:
        params.layers = min(params.layers, int(cfg["layers"]))
    s = bumpy.build(params)
    mc = embed.CutMetricConfig.from_surface(s, k=float(cfg["k"]), alpha=float(alpha), nodes=int(cfg["nodes"]),
                                            angles=int(cfg["angles"]), scales=int(cfg["scales"]), seed=int(cfg["seed"]))
    rep = embed.distortion_harness(int(cfg["n"]), mc, sample_pairs=int(cfg["pairs"]), seed=int(cfg["seed"]))
    out = Path(args.out)
    rep.to_csv(out)
    write_sidecar(out, cfg, started, {"summary": rep.summary()})
    print(json.dumps(rep.summary(), default=_default))


def cmd_wordmetric(args, cfg, started):
    from . import heis

    n = int(cfg["radius"])
    if n < 0:
        raise ValidationError("--radius must be nonnegative")
    try:
        ball = heis.word_ball(n)
    except heis.WordBallTooLarge as exc:
        raise ValidationError(str(exc))
    out = Path(args.out)
    ball.to_csv(out)
    write_sidecar(out, cfg, started, {"size": len(ball)})
    print(f"{len(ball)} points")


def cmd_check(args, cfg, started):
    from . import acceptance

    results = acceptance.run_suite(args.suite)
    if args.out:
        out = Path(args.out)
        out.write_text(json.dumps([{"number": r.number, "name": r.name, "passed": r.passed, "seconds": r.seconds,
                                    "failures": r.failures} for r in results], indent=2))
        write_sidecar(out, cfg, started)
    return 0 if all(r.passed for r in results) else 2


COMMANDS = {
    "surface": cmd_surface,
    "vper": cmd_vper,
    "omega": cmd_omega,
    "corona": cmd_corona,
    "embed": cmd_embed,
    "wordmetric": cmd_wordmetric,
    "check": cmd_check,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="heisvp", description="Intrinsic graphs in the Heisenberg group")
    p.add_argument("--config", help="JSON file with defaults (flags take precedence)")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int, help="worker count; HVP_THREADS overrides")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("surface", help="build and verify a bumpy surface")
    s.add_argument("--alpha", type=int)
    s.add_argument("--rho", help="integer >= 8 or 'calibrated'")
    s.add_argument("--layers", type=int)
    s.add_argument("--grid", type=int, help="verification grid size")
    s.add_argument("--nx", type=int)
    s.add_argument("--nz", type=int)
    s.add_argument("--no-verify", action="store_true")
    s.add_argument("--out", required=True, help="output directory")

    v = sub.add_parser("vper", help="vpP profile and Lq norms")
    v.add_argument("--field", required=True)
    v.add_argument("--region")
    v.add_argument("--a-min", type=float, dest="a_min")
    v.add_argument("--a-max", type=float, dest="a_max")
    v.add_argument("--steps", type=int)
    v.add_argument("--q", type=float, nargs="+")
    v.add_argument("--out", required=True)

    o = sub.add_parser("omega", help="Omega^P of an epigraph")
    o.add_argument("--field", required=True)
    o.add_argument("--region")
    o.add_argument("--R", type=float, nargs="+")
    o.add_argument("--nsamples", type=int)
    o.add_argument("--m-max", type=float, dest="m_max")
    o.add_argument("--out", required=True)

    c = sub.add_parser("corona", help="greedy foliated patchwork and diagnostics")
    c.add_argument("--field", required=True)
    c.add_argument("--eta", type=float)
    c.add_argument("--R", type=float)
    c.add_argument("--r", type=float)
    c.add_argument("--depth", type=int)
    c.add_argument("--nsamples", type=int)
    c.add_argument("--min-width", type=float, dest="min_width")
    c.add_argument("--vper-bound", action="store_true", dest="vper_bound")
    c.add_argument("--out", required=True)

    e = sub.add_parser("embed", help="Delta on a word ball")
    e.add_argument("--k", type=float)
    e.add_argument("--alpha", type=int)
    e.add_argument("--n", type=int)
    e.add_argument("--pairs", type=int)
    e.add_argument("--nodes", type=int)
    e.add_argument("--angles", type=int)
    e.add_argument("--scales", type=int)
    e.add_argument("--layers", type=int)
    e.add_argument("--out", required=True)

    w = sub.add_parser("wordmetric", help="word-metric ball as CSV")
    w.add_argument("--radius", type=int)
    w.add_argument("--out", required=True)

    k = sub.add_parser("check", help="run the acceptance criteria")
    k.add_argument("--suite", choices=("core", "full"), default="core")
    k.add_argument("--out")
    return p


def resolve_config(args) -> dict:
    """Merge defaults, the optional config file and the flags for the chosen subcommand."""
    cfg = dict(DEFAULTS.get(args.command, {}))
    cfg["seed"] = DEFAULTS["seed"]
    cfg["threads"] = DEFAULTS["threads"]
    if args.config:
        try:
            with open(args.config) as fh:
                filecfg = json.load(fh)
        except (OSError, ValueError) as exc:
            raise ValidationError(f"unreadable config file: {exc}")
        for key in ("seed", "threads"):
            if key in filecfg:
                cfg[key] = filecfg[key]
        cfg.update(filecfg.get(args.command, {}))
    for key, val in vars(args).items():
        if key in ("command", "config") or val is None:
            continue
        cfg[key] = val
    return cfg


def run(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    started = time.perf_counter()
    try:
        cfg = resolve_config(args)
        args.seed = cfg["seed"]
        args.threads = cfg["threads"]
        rc = COMMANDS[args.command](args, cfg, started)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, TypeError, MemoryError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return int(rc or 0)


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
