from __future__ import annotations

import csv
import os
import stat
from pathlib import Path

import pytest

from mmdc.cli import main
from mmdc.config import SweepSpec
from mmdc.metrics import SUMMARY_HEADER, rows_to_csv
from mmdc.sweep import cell_seed, enumerate_cells, run_cell, run_sweep

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_run_writes_summary_files_and_trace(tmp_path):
    out = tmp_path / "out"
    rc = main(["run", str(CONFIGS / "scenario.toml"), "--duration", "1", "--seed", "4",
               "--trace", "--export-world", "--output-dir", str(out)])
    assert rc == 0
    stem = "run_dual_seed4"
    rows = read_rows(out / f"{stem}_summary.csv")
    assert len(rows) == 1 and tuple(rows[0]) == SUMMARY_HEADER
    assert rows[0]["seed"] == "4"
    first = (out / f"{stem}_trace.jsonl").read_text().splitlines()[0]
    assert first == '{"format": "mmdc-trace", "version": 1}'
    for suffix in ("files", "topology", "field"):
        assert (out / f"{stem}_{suffix}.csv").exists()
    mask = os.umask(0)
    os.umask(mask)
    assert stat.S_IMODE(os.stat(out / f"{stem}_summary.csv").st_mode) == 0o666 & ~mask
    assert not list(out.glob(".*.tmp"))


def test_run_twice_is_byte_identical(tmp_path):
    outs = []
    for k in range(2):
        d = tmp_path / f"o{k}"
        main(["run", str(CONFIGS / "scenario.toml"), "--duration", "2", "--trace",
              "--output-dir", str(d)])
        outs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
    assert outs[0] == outs[1]
    assert len(outs[0]) == 3


def test_zero_duration_is_a_validation_error(tmp_path, capsys):
    rc = main(["run", str(CONFIGS / "scenario.toml"), "--duration", "0",
               "--output-dir", str(tmp_path)])
    assert rc == 2
    assert "duration_s" in capsys.readouterr().err


def test_missing_config_is_an_io_error(tmp_path):
    assert main(["run", str(tmp_path / "nope.toml"), "--output-dir", str(tmp_path)]) == 1


def test_env_var_sets_the_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("MMDC_OUTPUT_DIR", str(tmp_path / "env"))
    main(["run", str(CONFIGS / "scenario.toml"), "--duration", "0.5", "--scheme", "single"])
    assert (tmp_path / "env" / "run_single_seed1_summary.csv").exists()
    main(["run", str(CONFIGS / "scenario.toml"), "--duration", "0.5",
          "--output-dir", str(tmp_path / "flag")])
    assert (tmp_path / "flag" / "run_dual_seed1_summary.csv").exists()


def test_sweep_cli_row_count(tmp_path):
    spec = tmp_path / "sweep.toml"
    spec.write_text(
        'schemes = ["dual", "single"]\n'
        "densities = [1000, 2000, 4000, 6000]\n"
        "file_sizes = [1000000]\n"
        "seeds = 10\n"
        "[base]\n"
        "duration_s = 0.3\n"
    )
    rc = main(["sweep", str(spec), "--output-dir", str(tmp_path / "s"), "--jobs", "2"])
    assert rc == 0
    rows = read_rows(tmp_path / "s" / "sweep_summary.csv")
    assert len(rows) == 80
    assert all(r["error"] == "" for r in rows)
    assert {r["density"] for r in rows} == {"1000.0", "2000.0", "4000.0", "6000.0"}


def test_sweep_parallel_matches_serial():
    spec = SweepSpec(densities=(2000.0, 6000.0), seeds=(0, 1, 2), base={"duration_s": 1.0})
    assert rows_to_csv(run_sweep(spec, jobs=1)) == rows_to_csv(run_sweep(spec, jobs=3))


def test_cells_enumerate_in_declaration_order():
    spec = SweepSpec(densities=(1000.0, 4000.0), file_sizes=(1, 2), seeds=(0, 1))
    cells = enumerate_cells(spec)
    assert len(cells) == 2 * 2 * 2 * 2
    assert [c.index for c in cells] == list(range(16))
    assert (cells[0].scheme, cells[0].density, cells[0].file_size, cells[0].seed_index) == \
        ("dual", 1000.0, 1, 0)
    assert cells[-1].scheme == "single"


def test_scheme_pairs_share_a_seed():
    spec = SweepSpec(densities=(4000.0,), seeds=(0, 1))
    by = {(c.scheme, c.seed_index): c.master_seed for c in enumerate_cells(spec)}
    assert by[("dual", 0)] == by[("single", 0)]
    assert by[("dual", 0)] != by[("dual", 1)]
    assert cell_seed(2024, 4000, 1_000_000, 0) == cell_seed(2024, 4000.0, 1_000_000, 0)
    assert 0 <= cell_seed(2024, 4000.0, 1, 0) < 2**63


def test_failed_cell_becomes_an_error_row():
    cell = enumerate_cells(SweepSpec(seeds=(0,)))[0]
    row = run_cell(cell, {"duration_s": 0.1, "file_size_bytes": 1000, "pdu_size_bytes": 0})
    assert row["error"] and row["handover_rate"] == ""
    assert row["seed_index"] == 0


@pytest.mark.parametrize("argv", [[], ["run"], ["bogus"]])
def test_bad_usage_exits(argv):
    with pytest.raises(SystemExit):
        main(argv)
