"""Command-line front end: analyze, simulate, bifurcate, region, envelope, verify.

Exit codes: 0 success, 2 infeasible configuration, 1 internal or structural error.
Every run that writes files also writes ``<out>.json`` with the resolved
configuration, enough to repeat the run bit for bit.
"""
from __future__ import annotations

import argparse
import json
import os
import secrets
import sys
from pathlib import Path

from . import verify as verify_mod
from .dynamics import run_ensemble, run_trajectory
from .maps import BUILTINS, MapError, MapSpec, load_piecewise_json, parse_map, probe_map
from .noise import InfeasibleError, NoiseSpec
from .stability import (
    ControlSpec,
    LocallyStableError,
    NotApplicableError,
    build_report,
    local_constants,
    estimate_sides,
)
from .sweep import alpha_grid, analytic_boundary, bifurcation_sweep, collapse_threshold, \
    envelope_curve, region_raster, write_sidecar

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE = 0, 1, 2

DEFAULTS = {
    "map": "ricker",
    "param": [],
    "map_json": None,
    "noise": "bernoulli",
    "alpha": None,
    "ell": 0.0,
    "x0": 0.5,
    "steps": 10_000,
    "paths": 1,
    "seed": None,
    "out": None,
    "workers": os.cpu_count() or 1,
    "full": False,
    "alpha_range": None,
    "ell_range": None,
    "transient": 1000,
    "samples": 200,
    "no_simulate": False,
    "filter": None,
    "random_x0": False,
}


def _map_help() -> str:
    lines = ["built-in maps:"]
    for name, (_, text) in BUILTINS.items():
        lines.append(f"  {name:<10} {text}")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    # defaults are None so that config-file values can fill in underneath
    common.add_argument("--config", help="JSON file with option values (flags override it)")
    common.add_argument("--map", default=None, help='map name, optionally with params: "ricker r=3.5"')
    common.add_argument("--param", action="append", default=None, metavar="K=V",
                        help="map parameter (repeatable)")
    common.add_argument("--map-json", default=None, help="piecewise-linear map document")
    common.add_argument("--noise", default=None,
                        help='bernoulli, uniform, or a JSON noise document')
    common.add_argument("--alpha", type=float, default=None)
    common.add_argument("--ell", type=float, default=None)
    common.add_argument("--x0", type=float, default=None)
    common.add_argument("--steps", type=int, default=None, help="horizon")
    common.add_argument("--paths", type=int, default=None)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", default=None, help="output path (CSV/JSON)")
    common.add_argument("--workers", type=int, default=None)

    p = argparse.ArgumentParser(
        prog="noisy-pbc",
        description="Noisy prediction-based control of one-dimensional maps.",
        epilog=_map_help(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("analyze", parents=[common], help="stability constants and certificates",
                   epilog=_map_help(), formatter_class=argparse.RawDescriptionHelpFormatter)
    s = sub.add_parser("simulate", parents=[common], help="simulate trajectories")
    s.add_argument("--full", action="store_true", default=None, help="keep every state")
    s.add_argument("--random-x0", action="store_true", default=None,
                   help="draw each path's start from its stream")
    b = sub.add_parser("bifurcate", parents=[common], help="bifurcation data over alpha")
    b.add_argument("--alpha-range", nargs=3, type=float, metavar=("LO", "HI", "STEP"), default=None)
    b.add_argument("--transient", type=int, default=None)
    b.add_argument("--samples", type=int, default=None)
    r = sub.add_parser("region", parents=[common], help="(alpha, ell) stability raster")
    r.add_argument("--alpha-range", nargs=3, type=float, metavar=("LO", "HI", "STEP"), default=None)
    r.add_argument("--ell-range", nargs=3, type=float, metavar=("LO", "HI", "STEP"), default=None)
    r.add_argument("--no-simulate", action="store_true", default=None)
    sub.add_parser("envelope", parents=[common], help="derivative envelope curve")
    v = sub.add_parser("verify", help="run the acceptance checks")
    v.add_argument("--filter", default=None, help="run only checks matching this text")
    return p


def resolve(args: argparse.Namespace) -> dict:
    """Merge flags over the config file over defaults."""
    cfg = dict(DEFAULTS)
    path = getattr(args, "config", None)
    if path:
        with open(path) as fh:
            doc = json.load(fh)
        unknown = set(doc) - set(DEFAULTS)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(doc)
    for k, v in vars(args).items():
        if k in ("config", "command") or v is None:
            continue
        cfg[k] = v
    cfg["command"] = args.command
    return cfg


def load_map(cfg: dict) -> MapSpec:
    if cfg.get("map_json"):
        return load_piecewise_json(cfg["map_json"])
    text = cfg["map"]
    extra = " ".join(cfg.get("param") or [])
    return parse_map(f"{text} {extra}".strip())


def load_noise(cfg: dict) -> NoiseSpec:
    raw = cfg["noise"]
    if isinstance(raw, dict):
        return NoiseSpec.from_config(raw)
    raw = raw.strip()
    if raw.startswith("{"):
        return NoiseSpec.from_config(json.loads(raw))
    return NoiseSpec(raw)


def _seed(cfg: dict) -> int:
    if cfg["seed"] is None:
        cfg["seed"] = secrets.randbits(63)
        print(f"seed: {cfg['seed']}", file=sys.stderr)
    return int(cfg["seed"])


def _emit(cfg: dict, payload: str) -> None:
    if cfg["out"]:
        Path(cfg["out"]).write_text(payload)
    else:
        sys.stdout.write(payload)
        if not payload.endswith("\n"):
            sys.stdout.write("\n")


def _sidecar(cfg: dict, extra: dict | None = None) -> None:
    if not cfg["out"]:
        return
    meta = {k: v for k, v in cfg.items()}
    if extra:
        meta["result"] = extra
    write_sidecar(str(cfg["out"]) + ".json", meta)


# ---------------------------------------------------------------------------


def cmd_analyze(cfg: dict) -> int:
    spec = load_map(cfg)
    noise = load_noise(cfg) if cfg["noise"] else None
    control = None
    if cfg["alpha"] is not None:
        control = ControlSpec(cfg["alpha"], cfg["ell"])
    rep = build_report(spec, noise, control)
    _emit(cfg, rep.to_json())
    return EXIT_OK


def cmd_simulate(cfg: dict) -> int:
    spec = load_map(cfg)
    noise = load_noise(cfg)
    if cfg["alpha"] is None:
        raise ValueError("--alpha is required")
    control = ControlSpec(cfg["alpha"], cfg["ell"])
    seed = _seed(cfg)
    if cfg["paths"] <= 1:
        tr = run_trajectory(spec, control, noise, cfg["x0"], cfg["steps"], seed, 0,
                            full=bool(cfg["full"]))
        if cfg["out"]:
            tr.to_csv(cfg["out"])
        summary = tr.summary()
    else:
        ens = run_ensemble(spec, control, noise, None if cfg["random_x0"] else cfg["x0"],
                           cfg["steps"], cfg["paths"], seed)
        summary = {"rate": ens.rate, "counts": ens.counts(),
                   "trap_violations": ens.trap_violations, "rise_violations": ens.rise_violations}
        if cfg["out"]:
            Path(cfg["out"]).write_text(json.dumps(summary, indent=2) + "\n")
    print(json.dumps(summary, indent=2))
    _sidecar(cfg, summary)
    return EXIT_OK


def cmd_bifurcate(cfg: dict) -> int:
    spec = load_map(cfg)
    noise = load_noise(cfg)
    seed = _seed(cfg)
    lo, hi, step = cfg["alpha_range"] or (0.2, 0.5, 0.005)
    al = alpha_grid(lo, hi, step)
    tb = bifurcation_sweep(spec, noise, cfg["ell"], al, transient=cfg["transient"],
                           samples=cfg["samples"], paths_per_alpha=max(1, cfg["paths"]),
                           master_seed=seed, workers=cfg["workers"])
    thr = collapse_threshold(al, tb.rates)
    result = {"collapse_threshold": thr, "skipped": int(tb.skipped.sum())}
    if cfg["out"]:
        tb.to_csv(cfg["out"])
        tb.rates_to_csv(str(cfg["out"]) + ".rates.csv")
    else:
        for a, v in tb.pairs():
            print(f"{a!r},{v!r}")
    print(json.dumps(result), file=sys.stderr)
    _sidecar(cfg, {**tb.meta, **result})
    return EXIT_OK


def cmd_region(cfg: dict) -> int:
    spec = load_map(cfg)
    noise = load_noise(cfg)
    seed = _seed(cfg)
    probe = probe_map(spec)
    al = alpha_grid(*(cfg["alpha_range"] or (0.2, 0.6, 0.01)))
    el = alpha_grid(*(cfg["ell_range"] or (0.0, 0.36, 0.01)))
    kw = {}
    if probe.L0 is None:
        kw["L_pair"] = local_constants(spec, probe)
        kw["sides"] = estimate_sides(spec, probe)
    reg = region_raster(spec, noise, al, el, paths=cfg["paths"] if cfg["paths"] > 1 else 200,
                        horizon=cfg["steps"], master_seed=seed,
                        simulate=not cfg["no_simulate"], workers=cfg["workers"], **kw)
    dis = reg.disagreements()
    result = {"disagreements": dis, "boundary": analytic_boundary(reg)}
    if cfg["out"]:
        reg.to_csv(cfg["out"])
    else:
        for i, a in enumerate(reg.alpha_grid):
            for j, e in enumerate(reg.ell_grid):
                print(f"{a!r},{e!r},{reg.analytic[i, j]},{reg.rate[i, j]!r}")
    print(json.dumps({"disagreements": len(dis)}), file=sys.stderr)
    _sidecar(cfg, {**reg.meta, **result})
    return EXIT_OK


def cmd_envelope(cfg: dict) -> int:
    spec = load_map(cfg)
    curve = envelope_curve(spec, cfg["alpha"])
    result = {"alpha": curve.alpha, "max": curve.max, "argmax": curve.argmax}
    if cfg["out"]:
        curve.to_csv(cfg["out"])
    else:
        for x, v in zip(curve.xs, curve.values):
            print(f"{x!r},{v!r}")
    print(json.dumps(result), file=sys.stderr)
    _sidecar(cfg, result)
    return EXIT_OK


def cmd_verify(cfg: dict) -> int:
    results = verify_mod.run(cfg.get("filter"))
    failed = [c.number for c, r in results if not r.ok]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed"
          + (f"; failed: {failed}" if failed else ""))
    return EXIT_ERROR if failed else EXIT_OK


COMMANDS = {
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
    "bifurcate": cmd_bifurcate,
    "region": cmd_region,
    "envelope": cmd_envelope,
    "verify": cmd_verify,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve(args)
        return COMMANDS[cfg["command"]](cfg)
    except (InfeasibleError, LocallyStableError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except NotApplicableError as exc:
        print(f"not applicable: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (MapError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
