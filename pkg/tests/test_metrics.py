from __future__ import annotations

import csv
import io

import pytest
from hypothesis import given
from hypothesis import strategies as st

from mmdc.metrics import (
    FILE_HEADER,
    SUMMARY_HEADER,
    FileRecord,
    RunMetrics,
    box_stats,
    completion_time_stats,
    download_failure_ratio,
    error_row,
    failure_counts,
    file_rows,
    handover_rate,
    path_switch_rate,
    rows_to_csv,
    summary_row,
)


def files(ok=0, failed=0, inflight=0):
    out = []
    for k in range(ok):
        out.append(FileRecord(len(out), 10, k * 0.12, k * 0.12 + 0.12, k * 0.12 + 0.01, "ok"))
    for _ in range(failed):
        out.append(FileRecord(len(out), 10, 0.0, 0.12, None, "failed"))
    for _ in range(inflight):
        out.append(FileRecord(len(out), 10, 59.9, 60.02, None, "inflight"))
    return out


def test_handover_rate_examples():
    assert handover_rate(RunMetrics(handover_trials=5, sim_duration=50.0)) == pytest.approx(0.1)
    assert handover_rate(RunMetrics(handover_trials=0, sim_duration=60.0)) == 0.0
    with pytest.raises(ValueError):
        handover_rate(RunMetrics(handover_trials=1, sim_duration=0.0))
    with pytest.raises(ValueError):
        path_switch_rate(RunMetrics(sim_duration=0.0))


def test_path_switches_do_not_count_as_handovers():
    m = RunMetrics(handover_trials=2, path_switches=40, sim_duration=10.0)
    assert handover_rate(m) == pytest.approx(0.2)
    assert path_switch_rate(m) == pytest.approx(4.0)


def test_failure_ratio_examples():
    assert download_failure_ratio(RunMetrics(files=files(ok=500))) == 0.0
    assert download_failure_ratio(RunMetrics(files=files(ok=450, failed=50))) == pytest.approx(0.1)
    with pytest.raises(ValueError):
        download_failure_ratio(RunMetrics(files=[]))


def test_inflight_policy():
    m = RunMetrics(files=files(ok=8, failed=1, inflight=1))
    assert failure_counts(m) == (1, 9)
    assert failure_counts(m, count_inflight=True) == (2, 10)
    m.count_inflight = True
    assert download_failure_ratio(m) == pytest.approx(0.2)


@given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 5), st.integers(0, 40))
def test_metrics_are_scale_consistent(ok, failed, inflight, trials):
    if ok + failed == 0:
        return
    one = RunMetrics(handover_trials=trials, sim_duration=60.0,
                     files=files(ok, failed, inflight))
    two = RunMetrics(handover_trials=2 * trials, sim_duration=120.0,
                     files=files(ok, failed, inflight) * 2)
    assert handover_rate(two) == pytest.approx(handover_rate(one))
    assert download_failure_ratio(two) == pytest.approx(download_failure_ratio(one))
    f, total = failure_counts(one)
    assert total == ok + failed and f == failed


def test_box_stats_degenerate():
    s = box_stats([0.010] * 20)
    assert s.q1 == s.median == s.q3 == s.min == s.max == 0.010
    assert s.outliers == 0


def test_box_stats_single_outlier():
    s = box_stats([0.001, 0.002, 0.003, 0.004, 0.100])
    # q1 = 2, q3 = 4, IQR = 2, upper fence = 7 ms
    assert (s.q1, s.median, s.q3) == pytest.approx((0.002, 0.003, 0.004))
    assert s.outliers == 1


def test_box_stats_needs_values():
    with pytest.raises(ValueError):
        box_stats([])


def test_completion_time_is_on_the_nanosecond_grid():
    f = FileRecord(0, 10, 0.36, 0.48, 0.36 + 0.0123456789012, "ok")
    assert f.completion_time == 0.012345679
    m = RunMetrics(files=[f, FileRecord(1, 10, 0.0, 0.12, None, "failed")])
    assert completion_time_stats(m).n == 1


def test_summary_row_has_fixed_header():
    m = RunMetrics(scheme="dual", seed=3, density=4000.0, file_size=10, sim_duration=60.0,
                   handover_trials=6, files=files(ok=3, failed=1))
    row = summary_row(m)
    assert tuple(row) == SUMMARY_HEADER
    assert row["handover_rate"] == pytest.approx(0.1)
    assert row["failure_ratio"] == pytest.approx(0.25)
    text = rows_to_csv([row, error_row(4, "single", 1000.0, 10, "boom")])
    parsed = list(csv.DictReader(io.StringIO(text)))
    assert tuple(parsed[0]) == SUMMARY_HEADER
    assert parsed[1]["error"] == "boom" and parsed[1]["handover_rate"] == ""


def test_file_rows_round_trip_through_csv():
    m = RunMetrics(files=files(ok=2, failed=1))
    text = rows_to_csv(file_rows(m), FILE_HEADER)
    parsed = list(csv.DictReader(io.StringIO(text)))
    assert [r["status"] for r in parsed] == ["ok", "ok", "failed"]
    assert parsed[2]["completed"] == ""
    assert float(parsed[0]["completion_time"]) == pytest.approx(0.01)


def test_conservation_flag():
    m = RunMetrics(bytes_generated=10, bytes_delivered=6, bytes_residual=3, bytes_dropped=1)
    assert m.conserved
    m.bytes_dropped = 0
    assert not m.conserved
