"""Command-line entry point: ``mmdc run <config>`` and ``mmdc sweep <spec>``."""

from __future__ import annotations

import argparse
import dataclasses
import io
import os
import sys
import tempfile
from pathlib import Path

from .config import ConfigError, load_config, load_sweep
from .geometry import write_field_csv
from .metrics import FILE_HEADER, file_rows, rows_to_csv, summary_row
from .network import write_topology_csv
from .sim import Simulation
from .sweep import run_sweep

OUTPUT_ENV = "MMDC_OUTPUT_DIR"


def _umask() -> int:
    mask = os.umask(0)
    os.umask(mask)
    return mask


def atomic_write(path: Path, text: str) -> None:
    """Write via a sibling temp file and rename, so readers never see a partial file."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.chmod(tmp, 0o666 & ~_umask())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_with(path: Path, writer) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    os.close(fd)
    try:
        writer(tmp)
        os.chmod(tmp, 0o666 & ~_umask())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def resolve_output_dir(flag: str | None, fallback: str) -> Path:
    if flag:
        return Path(flag)
    return Path(os.environ.get(OUTPUT_ENV) or fallback)


def cmd_run(args: argparse.Namespace) -> int:
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.duration is not None:
        overrides["duration_s"] = args.duration
    if args.scheme is not None:
        overrides["scheme"] = args.scheme
    cfg = load_config(args.config, **overrides)
    out = resolve_output_dir(args.output_dir, "out")

    trace = io.StringIO() if args.trace else None
    sim = Simulation(cfg, trace=trace)
    metrics = sim.run()

    stem = f"run_{cfg.scheme}_seed{cfg.seed}"
    atomic_write(out / f"{stem}_summary.csv", rows_to_csv([summary_row(metrics)]))
    atomic_write(out / f"{stem}_files.csv", rows_to_csv(file_rows(metrics), FILE_HEADER))
    if trace is not None:
        atomic_write(out / f"{stem}_trace.jsonl", trace.getvalue())
    if args.export_world:
        _write_with(out / f"{stem}_topology.csv", lambda p: write_topology_csv(sim.nodes, p))
        _write_with(out / f"{stem}_field.csv", lambda p: write_field_csv(sim.field, p))
    print(f"{stem}: {metrics.handover_trials} handovers, {metrics.path_switches} path switches, "
          f"{sum(f.status == 'failed' for f in metrics.files)} failed files -> {out}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    spec = load_sweep(args.spec)
    if args.seeds is not None:
        spec = dataclasses.replace(spec, seeds=tuple(range(args.seeds)))
    if args.duration is not None:
        spec = dataclasses.replace(spec, base={**spec.base, "duration_s": args.duration})
    out = resolve_output_dir(args.output_dir, spec.output_dir)
    rows = run_sweep(spec, jobs=args.jobs)
    atomic_write(out / "sweep_summary.csv", rows_to_csv(rows))
    errors = sum(1 for r in rows if r["error"])
    print(f"{len(rows)} runs ({errors} failed) -> {out / 'sweep_summary.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mmdc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute one seeded run")
    run.add_argument("config", help="scenario TOML file")
    run.add_argument("--seed", type=int)
    run.add_argument("--duration", type=float, help="simulated seconds")
    run.add_argument("--scheme", choices=("dual", "single"))
    run.add_argument("--output-dir", help=f"defaults to ${OUTPUT_ENV} or ./out")
    run.add_argument("--trace", action=argparse.BooleanOptionalAction, default=False,
                     help="write the JSON-lines event trace")
    run.add_argument("--export-world", action="store_true",
                     help="also write topology and blockage CSVs")
    run.set_defaults(func=cmd_run)

    sweep = sub.add_parser("sweep", help="run every (scheme, density, size, seed) combination")
    sweep.add_argument("spec", help="sweep TOML file")
    sweep.add_argument("--jobs", type=int, help="worker processes (overrides the spec)")
    sweep.add_argument("--seeds", type=int, help="use seed indices 0..N-1")
    sweep.add_argument("--duration", type=float, help="simulated seconds per run")
    sweep.add_argument("--output-dir", help=f"overrides ${OUTPUT_ENV} and the spec")
    sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"mmdc: invalid configuration: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"mmdc: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
