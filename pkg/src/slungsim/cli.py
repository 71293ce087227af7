"""Command-line entry points: ``sim``, ``plan``, ``plot``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 log/plot I/O failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .errors import ConfigError, LogIOError, NumericError, SimulationAbort
from .integrator import simulate
from .logio import write_log
from .planner import solve_min_deriv
from .plots import emit_plots
from .scenario import FORMAT_VERSION, load_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4


def _default_out() -> str:
    return os.environ.get("SLUNGSIM_OUT", "out")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slungsim",
        description="Simulate aerial payload transport with cables or rigid links.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("sim", help="run one or more scenarios")
    p_sim.add_argument("--config", nargs="+", required=True,
                       help="scenario YAML file(s)")
    p_sim.add_argument("--out", default=None, help="output directory")
    p_sim.add_argument("--seed", type=int, default=None, help="override RNG seed")
    p_sim.add_argument("--duration", type=float, default=None,
                       help="override t_final [s]")
    p_sim.add_argument("--dt", type=float, default=None, help="override step [s]")
    p_sim.add_argument("--jobs", type=int, default=1,
                       help="parallel workers for scenario sweeps")

    p_plan = sub.add_parser("plan", help="solve a minimum-kth-derivative spline")
    p_plan.add_argument("--waypoints", required=True, help="waypoint YAML file")
    p_plan.add_argument("--k", type=int, default=4, help="derivative order to minimize")
    p_plan.add_argument("--out", required=True, help="output coefficient file")

    p_plot = sub.add_parser("plot", help="render plots from a CSV log")
    p_plot.add_argument("--log", required=True, help="CSV log path")
    p_plot.add_argument("--out", default=None, help="output directory")
    return parser


def _run_one(config_path: str, out_dir: Path, seed, duration, dt) -> int:
    spec = load_scenario(config_path)
    if seed is not None:
        spec.sim.seed = seed
    if duration is not None:
        spec.sim.t_final = duration
    if dt is not None:
        spec.sim.dt = dt
    out_dir.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    try:
        result = simulate(spec)
        rows, columns = result.rows, result.columns
        status = EXIT_OK
        note = None
    except SimulationAbort as exc:
        rows = exc.partial.rows if exc.partial is not None else []
        columns = exc.partial.columns if exc.partial is not None else ["t"]
        status = EXIT_NUMERIC
        note = str(exc)
    write_log(rows, columns, out_dir / "log.csv")
    manifest = {
        "scenario": str(config_path),
        "out_dir": str(out_dir),
        "seed": int(spec.sim.seed),
        "package_version": __version__,
        "format_version": FORMAT_VERSION,
        "wall_clock_s": time.perf_counter() - start,
    }
    if note is not None:
        manifest["aborted"] = note
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    if note is not None:
        print(f"error: simulation aborted: {note}", file=sys.stderr)
    else:
        print(f"wrote {out_dir / 'log.csv'} ({len(rows)} rows)")
    return status


def cmd_sim(args) -> int:
    out_root = Path(args.out if args.out is not None else _default_out())
    configs = args.config
    if len(configs) == 1:
        return _run_one(configs[0], out_root, args.seed, args.duration, args.dt)
    jobs = max(1, args.jobs)
    targets = [(c, out_root / Path(c).stem) for c in configs]
    codes = []
    if jobs == 1:
        for cfg, sub in targets:
            codes.append(_run_one(cfg, sub, args.seed, args.duration, args.dt))
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_one, cfg, sub, args.seed, args.duration, args.dt)
                       for cfg, sub in targets]
            codes = [f.result() for f in futures]
    return max(codes)


def cmd_plan(args) -> int:
    path = Path(args.waypoints)
    if not path.exists():
        raise ConfigError(f"waypoint file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(data, dict) or "times" not in data or "positions" not in data:
        raise ConfigError("waypoint file needs 'times' and 'positions'")
    spline = solve_min_deriv(np.asarray(data["positions"], dtype=float),
                             np.asarray(data["times"], dtype=float), k=args.k)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(yaml.safe_dump(spline.to_dict(), sort_keys=False))
    print(f"wrote {out} ({spline.n_segments} segments, k={spline.k}, "
          f"cost={spline.cost:.6g})")
    return EXIT_OK


def cmd_plot(args) -> int:
    out_dir = Path(args.out if args.out is not None else _default_out())
    written = emit_plots(args.log, out_dir)
    for p in written["paths"]:
        print(f"wrote {p}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "sim":
            return cmd_sim(args)
        if args.command == "plan":
            return cmd_plan(args)
        return cmd_plot(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (LogIOError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
