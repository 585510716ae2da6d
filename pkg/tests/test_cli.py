"""Command-line interface behavior and exit codes."""

import csv
import json
import subprocess
import sys

import pytest

from toricmc import cli


def _write_spec(path, body):
    path.write_text(body)
    return str(path)


TINY_SPEC = """\
[experiment]
schema_version = 1
kind = coherent_info
n = 2
l = 2
t = 0.5
realizations = 2
sweeps = 300
seed = 5
"""


def test_run_executes_spec_and_reports(tmp_path, capsys):
    spec = _write_spec(tmp_path / "spec.ini", TINY_SPEC)
    out = tmp_path / "out"
    code = cli.main(["run", spec, "--output", str(out)])
    captured = capsys.readouterr()
    assert code == cli.EXIT_OK
    assert "wrote" in captured.out and "complete" in captured.out
    assert (out / "coherent_info.csv").exists()
    assert (out / "meta.json").exists()


def test_run_rejects_invalid_spec(tmp_path, capsys):
    spec = _write_spec(
        tmp_path / "spec.ini", TINY_SPEC.replace("coherent_info", "nonsense")
    )
    code = cli.main(["run", spec, "--output", str(tmp_path / "out")])
    captured = capsys.readouterr()
    assert code == cli.EXIT_VALIDATION
    assert "spec error" in captured.err


def test_resume_completes_finished_run(tmp_path, capsys):
    spec = _write_spec(tmp_path / "spec.ini", TINY_SPEC)
    out = tmp_path / "out"
    assert cli.main(["run", spec, "--output", str(out)]) == cli.EXIT_OK
    capsys.readouterr()
    assert cli.main(["resume", str(out)]) == cli.EXIT_OK
    assert "complete" in capsys.readouterr().out


def test_resume_refuses_non_run_directory(tmp_path, capsys):
    code = cli.main(["resume", str(tmp_path)])
    assert code == cli.EXIT_INTEGRITY
    assert "integrity error" in capsys.readouterr().err


def test_threshold_prints_selfdual_temperature(capsys):
    assert cli.main(["threshold", "--N", "2"]) == cli.EXIT_OK
    assert capsys.readouterr().out.strip() == "0.9567288261"
    assert cli.main(["threshold", "--N", "8"]) == cli.EXIT_OK
    assert capsys.readouterr().out.strip() == "0.2488588749"


def test_threshold_rejects_bad_modulus(capsys):
    assert cli.main(["threshold", "--N", "1"]) == cli.EXIT_VALIDATION
    assert "spec error" in capsys.readouterr().err


def test_decode_bench_writes_pinned_columns(tmp_path, capsys):
    out = tmp_path / "bench"
    code = cli.main([
        "decode-bench", "--N", "2", "--L", "3", "--T", "0.6",
        "--trials", "100", "--sweeps", "150", "--output", str(out),
    ])
    assert code == cli.EXIT_OK
    with open(out / "decode_bench.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == [
        "N", "L", "T", "p_physical", "trials", "P_logical",
        "err_low", "err_high", "mean_mcf_cost", "mean_sweeps",
    ]
    assert rows[0]["trials"] == "100"


def test_decode_bench_rejects_too_few_trials(tmp_path, capsys):
    code = cli.main([
        "decode-bench", "--N", "2", "--L", "3", "--T", "0.6",
        "--trials", "10", "--output", str(tmp_path / "bench"),
    ])
    assert code == cli.EXIT_VALIDATION
    assert "100 trials" in capsys.readouterr().err


def test_oracle_check_reports_per_case_lines(tmp_path, capsys):
    code = cli.main([
        "oracle-check", "--sweeps", "2000", "--realizations", "1",
        "--tolerance", "1.0", "--output", str(tmp_path / "oracle"),
    ])
    captured = capsys.readouterr()
    assert code == cli.EXIT_OK
    lines = captured.out.strip().splitlines()
    assert len([ln for ln in lines if ln.startswith("ok")]) == 9
    assert lines[-1].startswith("worst tv distance")
    meta = json.loads((tmp_path / "oracle" / "meta.json").read_text())
    assert meta["status"] == "complete"


def test_oracle_check_flags_loose_sampling(tmp_path, capsys):
    # 2000 sweeps of a single realization cannot hit 1e-4 accuracy
    code = cli.main([
        "oracle-check", "--sweeps", "2000", "--realizations", "1",
        "--tolerance", "1e-4", "--output", str(tmp_path / "oracle"),
    ])
    captured = capsys.readouterr()
    assert code == cli.EXIT_PARTIAL
    assert "FAIL" in captured.out


def test_module_entry_point_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "toricmc", "threshold", "--N", "4"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert proc.stdout.strip() == "0.478364413"
