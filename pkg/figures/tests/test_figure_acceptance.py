"""Determinism acceptance: identical bytes from identical inputs, twice."""

import subprocess
import sys

import pytest

from helpers import write_coherent_csv, write_decode_csv


def _run(kind, csv_path, out_path):
    proc = subprocess.run(
        [sys.executable, "-m", "toricfigs", "plot", "--kind", kind,
         "--in", str(csv_path), "--out", str(out_path)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    return out_path.read_bytes()


@pytest.mark.acceptance("13", "panels rebuild byte-identically from the CSV contract")
@pytest.mark.parametrize("fmt", ["png", "svg"])
def test_panels_are_byte_identical_across_runs(tmp_path, fmt):
    coherent = write_coherent_csv(tmp_path / "coherent_info.csv")
    decode = write_decode_csv(tmp_path / "decode_bench.csv")
    for kind, csv_path in (("coherent_info", coherent), ("decode_bench", decode)):
        first = _run(kind, csv_path, tmp_path / f"{kind}-1.{fmt}")
        second = _run(kind, csv_path, tmp_path / f"{kind}-2.{fmt}")
        assert first == second, f"{kind} {fmt} output differs between runs"
