"""Command-line interface: ``mildbbm <subcommand> [options]``.

Global flags (``--seed --threads --out --config --check --plot``) are
accepted before or after the subcommand.  Settings come from the optional
YAML ``--config`` file with command-line flags taking precedence.
"""
from __future__ import annotations

import argparse
import sys
from typing import Optional

from .config import load_config
from .runner import run_experiment


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.replace(",", " ").split()]


def _globals(defaults: bool) -> argparse.ArgumentParser:
    sup = {} if defaults else {"default": argparse.SUPPRESS}
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int, help="master seed", **sup)
    g.add_argument("--threads", type=int, help="worker threads (results do not depend on it)",
                   **({"default": 1} if defaults else sup))
    g.add_argument("--out", help="output file (CSV, or JSON for 'env gen')", **sup)
    g.add_argument("--config", help="YAML configuration file", **sup)
    g.add_argument("--check", action="store_true",
                   help="exit non-zero if any acceptance check fails",
                   **({"default": False} if defaults else sup))
    g.add_argument("--plot", action="store_true", help="also write a gnuplot script next to --out",
                   **({"default": False} if defaults else sup))
    return p


def _model(p, radius_flag: str = "--radius"):
    p.add_argument("--dim", type=int)
    p.add_argument("--nu", type=float, help="obstacle intensity")
    p.add_argument(radius_flag, dest="a", type=float, help="obstacle radius")
    p.add_argument("--beta1", type=float, help="branching rate inside obstacles")
    p.add_argument("--beta2", type=float, help="free branching rate")
    p.add_argument("--box", type=float, help="half-width L of the obstacle box")


def _field_args(p):
    _model(p)
    p.add_argument("--field", help="obstacle field JSON (default: sample one)")
    p.add_argument("--field-seed", type=int, help="seed for the sampled field (default --seed)")


def _time_args(p, grid: bool = True):
    p.add_argument("--t", type=float, help="horizon")
    if grid:
        p.add_argument("--t-grid", type=_floats, help="comma-separated times")


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="mildbbm", parents=[_globals(True)],
                                  description="Branching Brownian motion among mild obstacles.")
    # the subcommand may be omitted when --config names the experiment
    sub = top.add_subparsers(dest="command")
    g = _globals(False)

    p = sub.add_parser("constants", parents=[g], help="closed-form constants table")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--nu", type=float, required=True)
    p.add_argument("--beta2", type=float)

    env = sub.add_parser("env", help="obstacle fields").add_subparsers(dest="env_cmd",
                                                                      required=True)
    p = env.add_parser("gen", parents=[g], help="sample a field and save it as JSON")
    _model(p)
    p = env.add_parser("clearing", parents=[g], help="search for an obstacle-free ball")
    p.add_argument("--field", required=True)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--search-l", type=float, required=True)
    p.add_argument("--grid-step", type=float)

    p = sub.add_parser("simulate", parents=[g], help="BBM replicates")
    p.add_argument("--mode", choices=["free", "obstacle", "absorbed"], default="free")
    _field_args(p)
    _time_args(p, grid=False)
    p.add_argument("--checkpoints", type=_floats)
    p.add_argument("--reps", type=int)
    p.add_argument("--cap", type=int)
    p.add_argument("--h", type=float, help="bridge sub-step")
    p.add_argument("--confine", type=_floats, help="radii for confinement flags")
    p.add_argument("--absorb-radius", type=float)

    yule = sub.add_parser("yule", help="Yule genealogy").add_subparsers(dest="yule_cmd",
                                                                       required=True)
    p = yule.add_parser("coalescence", parents=[g], help="pair MRCA times vs the exact law")
    p.add_argument("--beta2", type=float)
    p.add_argument("--t", type=float)
    p.add_argument("--reps", type=int)

    p = sub.add_parser("fk-moment", parents=[g], help="Feynman-Kac first moment")
    _field_args(p)
    _time_args(p)
    p.add_argument("--paths", type=int)
    p.add_argument("--h", type=float)
    p.add_argument("--direct-reps", type=int, help="also run direct BBM replicates")
    p.add_argument("--antithetic", action="store_true", default=None)
    p.add_argument("--cap", type=int)

    p = sub.add_parser("exit-survival", parents=[g], help="ball exit survival and slope")
    p.add_argument("--dim", type=int)
    p.add_argument("--R", type=float, help="ball radius")
    _time_args(p)
    p.add_argument("--paths", type=int)
    p.add_argument("--h", type=float)

    for name, text in (("lln", "normalized growth rates"), ("speed", "radial speed bound"),
                       ("local-growth", "window counts")):
        p = sub.add_parser(name, parents=[g], help=text)
        _field_args(p)
        _time_args(p)
        p.add_argument("--reps", type=int)
        p.add_argument("--cap", type=int)
        p.add_argument("--h", type=float)
        if name == "lln":
            p.add_argument("--fk-paths", type=int)
        if name == "speed":
            p.add_argument("--free-margin", type=float)
            p.add_argument("--free-reps", type=int)
        if name == "local-growth":
            p.add_argument("--window-center", type=_floats)
            p.add_argument("--window-radius", type=float)
            p.add_argument("--eps", type=float)

    p = sub.add_parser("product-bound", parents=[g], help="confinement product lower bound")
    p.add_argument("--dim", type=int)
    p.add_argument("--beta2", type=float)
    _time_args(p)
    p.add_argument("--radii", type=_floats)
    p.add_argument("--g", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--h", type=float)

    p = sub.add_parser("check", parents=[g], help="run the acceptance suite")
    p.add_argument("--only", type=lambda s: [int(x) for x in s.split(",")],
                   help="comma-separated criterion numbers")
    return top


def _experiment_name(args) -> Optional[str]:
    if args.command is None:
        return None
    if args.command == "env":
        return f"env-{args.env_cmd}"
    if args.command == "yule":
        return "yule-coalescence"
    return args.command


def overrides_from_args(args) -> dict:
    v = vars(args)
    o: dict = {"params": {}, "options": {}}
    for key in ("dim", "box", "reps", "cap", "h", "seed", "out"):
        if v.get(key) is not None:
            o[key] = v[key]
    for key in ("nu", "a", "beta1", "beta2"):
        if v.get(key) is not None:
            o["params"][key] = v[key]
    if v.get("paths") is not None:
        o["n_paths"] = v["paths"]
    grid = v.get("t_grid")
    t = v.get("t")
    cps = v.get("checkpoints")
    if cps is not None or t is not None or grid is not None:
        times = set(grid or []) | set(cps or [])
        if t is not None:
            times.add(t)
            times = {x for x in times if x <= t}
        o["t_grid"] = sorted(times)
    for flag, key in (("field", "field"), ("field_seed", "field_seed"), ("mode", "mode"),
                      ("rho", "rho"), ("search_l", "search_l"), ("grid_step", "grid_step"),
                      ("confine", "confine"), ("absorb_radius", "radius"), ("R", "radius"),
                      ("direct_reps", "direct_reps"), ("antithetic", "antithetic"),
                      ("fk_paths", "fk_paths"), ("free_margin", "free_margin"), ("free_reps", "free_reps"),
                      ("window_center", "center"), ("window_radius", "radius"),
                      ("eps", "eps"), ("radii", "radii"), ("g", "g"), ("only", "only")):
        if v.get(flag) is not None:
            o["options"][key] = v[flag]
    return o


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None and getattr(args, "config", None) is None:
        parser.error("give a subcommand or a --config file naming the experiment")
    try:
        cfg = load_config(getattr(args, "config", None), overrides_from_args(args),
                          experiment=_experiment_name(args))
        return run_experiment(cfg, threads=max(1, args.threads), check=args.check,
                              plot=args.plot)
    except (ValueError, OSError) as exc:
        print(f"mildbbm: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
