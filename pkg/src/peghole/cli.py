"""Command line entry point: ``peghole {run,sweep,compare,plot-data}``."""
from __future__ import annotations

import argparse
from dataclasses import replace
import json
import sys
from pathlib import Path

from .harness import (
    METHODS,
    EpisodeConfig,
    emit_results,
    format_table,
    grid_displacement,
    load_config,
    run_episode,
    sweep,
    trajectory_csv,
    trajectory_ndjson,
)


def _base(args) -> EpisodeConfig:
    cfg = load_config(args.config) if args.config else EpisodeConfig()
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _episode(args, parser, record=False) -> EpisodeConfig:
    base = _base(args)
    e0 = grid_displacement(args.dr, args.theta)
    if not base.geom.in_partial_overlap(e0):
        lo, hi = base.geom.overlap_bounds
        parser.error(f"--dr must lie in ({lo:g}, {hi:g}) m")
    return replace(base, method=args.method, e0=e0, record=record)


def _cmd_run(args, parser) -> int:
    cfg = _episode(args, parser, record=bool(args.log))
    m = run_episode(cfg)
    if args.log:
        Path(args.log).write_text(trajectory_ndjson(m.trajectory))
    out = m.as_dict()
    out["transitions"] = [list(t) for t in m.transitions]
    print(json.dumps(out, indent=2))
    return 0 if m.success else 1


def _cmd_sweep(args, parser) -> int:
    result = sweep(args.method, _base(args), workers=args.workers)
    emit_results(result, args.out, args.format)
    agg = result.aggregate()
    print(format_table({args.method: agg}))
    return 0


def _cmd_compare(args, parser) -> int:
    base = _base(args)
    table = {}
    for method in args.methods:
        result = sweep(method, base, workers=args.workers)
        if args.out_dir:
            Path(args.out_dir).mkdir(parents=True, exist_ok=True)
            emit_results(result, Path(args.out_dir) / f"{method}.csv")
        table[method] = result.aggregate()
    print(format_table(table))
    return 0


def _cmd_plot_data(args, parser) -> int:
    cfg = _episode(args, parser, record=True)
    m = run_episode(cfg)
    text = trajectory_csv(m.trajectory)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="peghole", description="Peg-in-hole search experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--config", help="INI file overriding the defaults")
        if seed:
            sp.add_argument("--seed", type=int, default=None)

    def episode_args(sp):
        sp.add_argument("--method", choices=METHODS, default="active")
        sp.add_argument("--dr", type=float, required=True, help="initial offset magnitude, m")
        sp.add_argument("--theta", type=float, required=True, help="initial offset angle, rad")

    sp = sub.add_parser("run", help="run one episode and print its metrics as JSON")
    episode_args(sp)
    common(sp)
    sp.add_argument("--log", help="write the trajectory as newline-delimited JSON")
    sp.set_defaults(func=_cmd_run)

    sp = sub.add_parser("sweep", help="run the 600-point grid for one method")
    sp.add_argument("--method", choices=METHODS, default="active")
    sp.add_argument("--out", required=True)
    sp.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    sp.add_argument("--workers", type=int, default=1)
    common(sp)
    sp.set_defaults(func=_cmd_sweep)

    sp = sub.add_parser("compare", help="sweep several methods and print an aggregate table")
    sp.add_argument("--methods", nargs="+", choices=METHODS, default=["active", "spiral"])
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--out-dir")
    common(sp)
    sp.set_defaults(func=_cmd_compare)

    sp = sub.add_parser("plot-data", help="emit the peg-origin trajectory of one episode as CSV")
    episode_args(sp)
    common(sp)
    sp.add_argument("--out")
    sp.set_defaults(func=_cmd_plot_data)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except (ValueError, OSError) as exc:
        print(f"peghole: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
