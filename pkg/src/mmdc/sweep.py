"""Sweep enumeration, per-cell seeding and (optionally parallel) execution."""

from __future__ import annotations

import hashlib
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any

from .config import SweepSpec, config_from_dict
from .metrics import error_row, summary_row
from .sim import run_scenario


@dataclass(frozen=True)
class SweepCell:
    index: int
    scheme: str
    density: float
    file_size: int
    seed_index: int
    master_seed: int


def cell_seed(global_seed: int, density: float, file_size: int, seed_index: int) -> int:
    """Master seed for one sweep cell.

    The scheme is left out on purpose: both schemes of a pair see the same
    blockages, shadowing and traffic.
    """
    key = f"{int(global_seed)}|{float(density)!r}|{int(file_size)}|{int(seed_index)}"
    digest = hashlib.sha256(key.encode("ascii")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def enumerate_cells(spec: SweepSpec) -> list[SweepCell]:
    cells = []
    for scheme in spec.schemes:
        for density in spec.densities:
            for size in spec.file_sizes:
                for k in spec.seeds:
                    seed = cell_seed(spec.global_seed, density, size, k)
                    cells.append(SweepCell(len(cells), scheme, density, size, k, seed))
    return cells


def run_cell(cell: SweepCell, base: dict[str, Any]) -> dict[str, object]:
    """Run one cell; failures become an error-marked row instead of an exception."""
    try:
        cfg = config_from_dict(base, scheme=cell.scheme, seed=cell.master_seed,
                               blockage_density_per_km2=cell.density,
                               file_size_bytes=cell.file_size)
        row = summary_row(run_scenario(cfg))
    except Exception as exc:  # noqa: BLE001 - the sweep keeps going by design
        detail = traceback.format_exception_only(type(exc), exc)[-1].strip()
        row = error_row(cell.master_seed, cell.scheme, cell.density, cell.file_size, detail)
    row["seed_index"] = cell.seed_index
    return row


def _run_packed(args: tuple[SweepCell, dict[str, Any]]) -> dict[str, object]:
    return run_cell(*args)


def run_sweep(spec: SweepSpec, jobs: int | None = None) -> list[dict[str, object]]:
    """Rows in enumeration order, independent of how many workers ran them."""
    cells = enumerate_cells(spec)
    work = [(c, spec.base) for c in cells]
    jobs = spec.jobs if jobs is None else jobs
    if jobs <= 1:
        return [_run_packed(w) for w in work]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_packed, work, chunksize=1))
