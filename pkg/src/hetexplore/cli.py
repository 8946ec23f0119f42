"""Command-line front end: ``hetexplore {run,sweep,check,mapgen}``.

Exit codes: 0 success, 1 configuration or I/O error, 2 an episode hit
its tick cap, 3 a check suite failed.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import logging
import math
import re
import statistics
import sys
from dataclasses import fields
from pathlib import Path

from .checks import SUITES, run_suite
from .sim import SimConfig, rows_to_csv, run_episode, run_sweep
from .world import generate_map, save_grid_file

EXIT_OK, EXIT_CONFIG, EXIT_INCOMPLETE, EXIT_CHECK = 0, 1, 2, 3

logger = logging.getLogger("hetexplore")

EXAMPLE_CONFIG = """\
# Episode parameters. Only seed is mandatory.
[episode]
seed = 0
# rooms, corridors or open; map_path loads an OGRID file instead
map_kind = rooms
map_size = 40x40
robots = 3
alpha_lo = 0.8
alpha_hi = 1.2
# sensing radius in map units
radius = 2.0
# sensor noise level: 0, 1 or 2
noise = 0
buffer_cap = 14
# stop once this fraction of the initial entropy is gone
threshold = 0.99
max_ticks = 500

[output]
out = out
snapshot_every = 0
verbosity = warning

# Only read by the sweep subcommand.
[sweep]
alpha_ranges = 0.3:0.7, 0.8:1.2, 2:4
radii = 2.0
noise_levels = 2
trials = 10
"""


class ConfigError(ValueError):
    pass


def _line_of(path: Path, section: str, key: str) -> int | None:
    current = None
    for no, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.strip()
        m = re.fullmatch(r"\[(.+)\]", line)
        if m:
            current = m.group(1).strip()
        elif current == section and re.match(rf"{re.escape(key)}\s*[=:]", line):
            return no
    return None


def _fail(path: Path, section: str, key: str, msg: str) -> ConfigError:
    line = _line_of(path, section, key)
    where = f"{path}:{line}" if line else str(path)
    return ConfigError(f"{where}: [{section}] {key}: {msg}")


_CASTS = {int: int, float: float, str: str}


def _parse_size(text: str) -> tuple[int, int]:
    parts = re.split(r"[x,\s]+", text.strip())
    if len(parts) != 2:
        raise ValueError("expected HxW")
    return int(parts[0]), int(parts[1])


def _read(path) -> tuple[configparser.ConfigParser, Path]:
    path = Path(path)
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if "episode" not in parser:
        raise ConfigError(f"{path}: missing [episode] section")
    return parser, path


def load_sim_config(path) -> tuple[SimConfig, dict]:
    """Parse the ``[episode]`` and ``[output]`` sections of an INI config."""
    parser, path = _read(path)
    ep = parser["episode"]
    if "seed" not in ep:
        raise ConfigError(f"{path}: [episode] seed is mandatory")
    kwargs = {}
    known = {f.name: f for f in fields(SimConfig)}
    for key, text in ep.items():
        if key not in known:
            raise _fail(path, "episode", key, "unknown key")
        try:
            if key == "map_size":
                kwargs[key] = _parse_size(text)
            elif key == "map_path":
                kwargs[key] = text or None
            else:
                default = known[key].default
                cast = int if key == "seed" else type(default)
                kwargs[key] = _CASTS[cast](text)
        except (ValueError, KeyError) as exc:
            raise _fail(path, "episode", key, f"bad value {text!r} ({exc})") from exc
    try:
        config = SimConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    out = parser["output"] if "output" in parser else {}
    try:
        output = {
            "out": out.get("out", "out"),
            "snapshot_every": int(out.get("snapshot_every", 0)),
            "verbosity": out.get("verbosity", "warning"),
        }
    except ValueError as exc:
        raise _fail(path, "output", "snapshot_every", str(exc)) from exc
    return config, output


def load_sweep_spec(path) -> dict:
    parser, path = _read(path)
    if "sweep" not in parser:
        raise ConfigError(f"{path}: missing [sweep] section")
    sw = parser["sweep"]
    spec = {}
    for key, conv in (
        ("alpha_ranges", lambda s: [tuple(float(v) for v in r.split(":")) for r in s.split(",")]),
        ("radii", lambda s: [float(v) for v in s.split(",")]),
        ("noise_levels", lambda s: [int(v) for v in s.split(",")]),
        ("trials", int),
    ):
        if key not in sw:
            raise ConfigError(f"{path}: [sweep] {key} is required")
        try:
            spec[key] = conv(sw[key])
        except ValueError as exc:
            raise _fail(path, "sweep", key, f"bad value {sw[key]!r}") from exc
    if any(len(r) != 2 for r in spec["alpha_ranges"]):
        raise _fail(path, "sweep", "alpha_ranges", "each range is lo:hi")
    return spec


def _setup_logging(level: str) -> None:
    logging.basicConfig(level=getattr(logging, level.upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def cmd_run(args) -> int:
    config, output = load_sim_config(args.config)
    _setup_logging(output["verbosity"])
    out = Path(args.out or output["out"])
    every = args.snapshot_every if args.snapshot_every is not None else output["snapshot_every"]
    out.mkdir(parents=True, exist_ok=True)
    snaps = out / "snapshots"

    def snapshot(tick, grid):
        snaps.mkdir(exist_ok=True)
        save_grid_file(grid, snaps / f"tick_{tick:05d}.ogrid")

    metrics, grid = run_episode(config, every or None, snapshot)
    row = {
        "seed": config.seed, "alpha_lo": config.alpha_lo, "alpha_hi": config.alpha_hi,
        "radius": config.radius, "noise": config.noise, "robots": config.robots,
        "iterations": metrics.iterations_to_completion, "completed": int(metrics.completed),
        "total_path": metrics.total_path_length, "cost": 0.0 if metrics.completed else math.nan,
        "final_entropy": metrics.final_entropy, "initial_entropy": metrics.initial_entropy,
    }
    (out / "metrics.csv").write_text(rows_to_csv([row]))
    with open(out / "entropy_trace.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "entropy"])
        w.writerows((k, repr(h)) for k, h in enumerate(metrics.entropy_trace))
    with open(out / "robots.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["robot", "alpha", "path_length"])
        w.writerows((k, repr(a), repr(p)) for k, (a, p) in enumerate(zip(metrics.alphas, metrics.robot_paths)))
    save_grid_file(grid, out / "final_map.ogrid")
    print(f"{metrics.termination}: {metrics.iterations_to_completion} iterations, "
          f"path {metrics.total_path_length:.3f}, entropy {metrics.initial_entropy:.3f} -> "
          f"{metrics.final_entropy:.3f}")
    return EXIT_OK if metrics.completed else EXIT_INCOMPLETE


def summarize(rows) -> list[tuple]:
    """Per alpha range: ``(lo, hi, completed episodes, mean cost, sample stdev of cost)``."""
    groups: dict[tuple, list[float]] = {}
    for r in rows:
        groups.setdefault((r["alpha_lo"], r["alpha_hi"]), [])
        if not math.isnan(r["cost"]):
            groups[(r["alpha_lo"], r["alpha_hi"])].append(r["cost"])
    out = []
    for (lo, hi), costs in groups.items():
        mean = statistics.fmean(costs) if costs else math.nan
        sd = statistics.stdev(costs) if len(costs) > 1 else 0.0
        out.append((lo, hi, len(costs), mean, sd))
    return out


def cmd_sweep(args) -> int:
    config, output = load_sim_config(args.config)
    spec = load_sweep_spec(args.config)
    _setup_logging(output["verbosity"])
    out = Path(args.out or output["out"])
    out.mkdir(parents=True, exist_ok=True)
    rows, text = run_sweep(config, spec["alpha_ranges"], spec["radii"], spec["noise_levels"],
                           spec["trials"], jobs=args.jobs)
    (out / "sweep.csv").write_text(text)
    print(f"{'alpha range':>14} {'n':>4} {'mean cost':>10} {'stdev':>8}")
    for lo, hi, n, mean, sd in summarize(rows):
        print(f"{f'[{lo:g}, {hi:g}]':>14} {n:>4} {mean:>10.4f} {sd:>8.4f}")
    return EXIT_OK if all(r["completed"] for r in rows) else EXIT_INCOMPLETE


def cmd_check(args) -> int:
    failed = False
    for res in run_suite(args.suite):
        print(res.line())
        if not res.ok:
            failed = True
            for f in res.failures[:10]:
                print(f"  failing case: {f}")
    return EXIT_CHECK if failed else EXIT_OK


def cmd_mapgen(args) -> int:
    try:
        size = _parse_size(args.size)
    except ValueError as exc:
        raise ConfigError(f"bad size {args.size!r}: {exc}") from exc
    grid = generate_map(args.kind, size, seed=args.seed)
    try:
        save_grid_file(grid, args.out)
    except OSError as exc:
        raise ConfigError(f"cannot write {args.out}: {exc}") from exc
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hetexplore", description="Heterogeneous multi-robot exploration simulator.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one exploration episode")
    run.add_argument("--config", required=True)
    run.add_argument("--out")
    run.add_argument("--snapshot-every", type=int)
    run.set_defaults(func=cmd_run)

    sweep = sub.add_parser("sweep", help="run a factorial sweep of episodes")
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--out")
    sweep.add_argument("--jobs", type=int, default=1)
    sweep.set_defaults(func=cmd_sweep)

    check = sub.add_parser("check", help="run a certificate suite")
    check.add_argument("suite", choices=sorted(SUITES))
    check.set_defaults(func=cmd_check)

    mapgen = sub.add_parser("mapgen", help="write a generated ground-truth map")
    mapgen.add_argument("kind", choices=["open", "rooms", "corridors"])
    mapgen.add_argument("--size", default="40x40")
    mapgen.add_argument("--seed", type=int, required=True)
    mapgen.add_argument("--out", required=True)
    mapgen.set_defaults(func=cmd_mapgen)

    sub.add_parser("example-config", help="print a commented config file").set_defaults(
        func=lambda args: print(EXAMPLE_CONFIG, end="") or EXIT_OK)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
