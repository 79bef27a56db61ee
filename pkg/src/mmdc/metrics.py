"""Run-level counters and the derived handover / download metrics."""

from __future__ import annotations

import csv
import io
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np

SUMMARY_HEADER = (
    "seed", "seed_index", "scheme", "density", "file_size", "duration", "handover_trials",
    "handover_rate", "path_switches", "path_switch_rate", "fallback_count", "files_total",
    "files_failed", "failure_ratio", "ct_min", "ct_q1", "ct_median", "ct_q3", "ct_max", "ct_outliers",
    "bytes_generated", "bytes_delivered", "bytes_residual", "bytes_dropped", "error",
)

FILE_HEADER = ("file_id", "size", "created", "deadline", "completed", "status", "completion_time")


@dataclass
class FileRecord:
    file_id: int
    size: int
    created: float
    deadline: float
    completed: float | None
    status: str  # "ok", "failed" or "inflight"

    @property
    def completion_time(self) -> float | None:
        # nanosecond grid, matching the scheduler clock
        return None if self.completed is None else round(self.completed - self.created, 9)


@dataclass
class RunMetrics:
    scheme: str = ""
    seed: int = 0
    density: float = 0.0
    file_size: int = 0
    sim_duration: float = 0.0
    handover_trials: int = 0
    handover_aborts: int = 0
    path_switches: int = 0
    fallback_events: int = 0
    files: list[FileRecord] = field(default_factory=list)
    bytes_generated: int = 0
    bytes_delivered: int = 0
    bytes_residual: int = 0
    bytes_dropped: int = 0
    duplicate_pdus: int = 0
    pdcp_double_delivery: bool = False
    events_processed: int = 0
    sinr_series: list[tuple[float, float, float]] | None = None
    count_inflight: bool = False

    @property
    def conserved(self) -> bool:
        return self.bytes_generated == (
            self.bytes_delivered + self.bytes_residual + self.bytes_dropped
        )


def handover_rate(m: RunMetrics) -> float:
    if m.sim_duration <= 0:
        raise ValueError("simulation duration must be positive")
    return m.handover_trials / m.sim_duration


def path_switch_rate(m: RunMetrics) -> float:
    if m.sim_duration <= 0:
        raise ValueError("simulation duration must be positive")
    return m.path_switches / m.sim_duration


def failure_counts(m: RunMetrics, count_inflight: bool | None = None) -> tuple[int, int]:
    """(failed, total); in-flight files follow the run's policy unless overridden."""
    if count_inflight is None:
        count_inflight = m.count_inflight
    failed = sum(1 for f in m.files if f.status == "failed")
    total = sum(1 for f in m.files if f.status != "inflight")
    if count_inflight:
        inflight = sum(1 for f in m.files if f.status == "inflight")
        failed += inflight
        total += inflight
    return failed, total


def download_failure_ratio(m: RunMetrics, count_inflight: bool | None = None) -> float:
    failed, total = failure_counts(m, count_inflight)
    if total == 0:
        raise ValueError("no file transmissions to rate")
    return failed / total


@dataclass(frozen=True)
class CompletionStats:
    n: int
    min: float
    q1: float
    median: float
    q3: float
    max: float
    outliers: int


def box_stats(values: Sequence[float] | np.ndarray) -> CompletionStats:
    """Five-number summary; outliers lie beyond 1.5 IQR from the quartiles."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ValueError("need at least one value")
    q1, med, q3 = np.percentile(x, [25, 50, 75])
    iqr = q3 - q1
    lo, hi = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    outliers = int(np.count_nonzero((x < lo) | (x > hi)))
    return CompletionStats(int(x.size), float(x.min()), float(q1), float(med), float(q3),
                           float(x.max()), outliers)


def completion_times(m: RunMetrics) -> list[float]:
    return [f.completion_time for f in m.files if f.completed is not None]


def completion_time_stats(m: RunMetrics) -> CompletionStats:
    return box_stats(completion_times(m))


def summary_row(m: RunMetrics, error: str = "") -> dict[str, object]:
    failed, total = failure_counts(m)
    row: dict[str, object] = {
        "seed": m.seed,
        "seed_index": "",
        "scheme": m.scheme,
        "density": m.density,
        "file_size": m.file_size,
        "duration": m.sim_duration,
        "handover_trials": m.handover_trials,
        "handover_rate": handover_rate(m) if m.sim_duration > 0 else "",
        "path_switches": m.path_switches,
        "path_switch_rate": path_switch_rate(m) if m.sim_duration > 0 else "",
        "fallback_count": m.fallback_events,
        "files_total": total,
        "files_failed": failed,
        "failure_ratio": failed / total if total else "",
        "bytes_generated": m.bytes_generated,
        "bytes_delivered": m.bytes_delivered,
        "bytes_residual": m.bytes_residual,
        "bytes_dropped": m.bytes_dropped,
        "error": error,
    }
    times = completion_times(m)
    if times:
        st = box_stats(times)
        row.update(ct_min=st.min, ct_q1=st.q1, ct_median=st.median, ct_q3=st.q3,
                   ct_max=st.max, ct_outliers=st.outliers)
    else:
        row.update(ct_min="", ct_q1="", ct_median="", ct_q3="", ct_max="", ct_outliers="")
    return {k: row[k] for k in SUMMARY_HEADER}


def error_row(seed: int, scheme: str, density: float, file_size: int, error: str) -> dict:
    row = {k: "" for k in SUMMARY_HEADER}
    row.update(seed=seed, scheme=scheme, density=density, file_size=file_size, error=error)
    return row


def _fmt(v: object) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows: Iterable[dict[str, object]], header: Sequence[str] = SUMMARY_HEADER) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(row.get(k, "")) for k in header])
    return buf.getvalue()


def file_rows(m: RunMetrics) -> list[dict[str, object]]:
    return [
        {
            "file_id": f.file_id, "size": f.size, "created": f.created, "deadline": f.deadline,
            "completed": "" if f.completed is None else f.completed, "status": f.status,
            "completion_time": "" if f.completed is None else f.completion_time,
        }
        for f in m.files
    ]
