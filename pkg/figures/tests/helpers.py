"""Synthetic CSVs that follow the result column contract."""

import csv
import math
from pathlib import Path

COHERENT_COLUMNS = [
    "kind", "N", "L", "T", "realizations", "sweeps", "value", "error",
    "normalized_value", "normalized_error", "warning_fraction", "spec_hash",
]

DECODE_COLUMNS = [
    "N", "L", "T", "p_physical", "trials", "P_logical",
    "err_low", "err_high", "mean_mcf_cost", "mean_sweeps",
]


def write_coherent_csv(path: Path, N: int = 8, sizes=(16, 24, 32)) -> Path:
    temps = [0.10, 0.20, 0.30, 0.40, 0.50]
    rows = []
    for L in sizes:
        for T in temps:
            # smooth synthetic crossover shape, larger L steeper
            norm = 0.5 * (1 - math.tanh((T - 0.3) * L / 4)) * 0.9 + 0.05
            rows.append({
                "kind": "coherent_info", "N": N, "L": L, "T": T,
                "realizations": 50, "sweeps": 50000,
                "value": norm * 2 * math.log(N), "error": 0.02,
                "normalized_value": norm, "normalized_error": 0.01,
                "warning_fraction": 0.0, "spec_hash": "f" * 12,
            })
    _write(path, COHERENT_COLUMNS, rows)
    return path


def write_decode_csv(path: Path, N: int = 4, sizes=(8, 12, 16)) -> Path:
    temps = [0.42, 0.46, 0.50, 0.54]
    rows = []
    for L in sizes:
        for T in temps:
            p = min(0.95, max(0.02, 0.5 + (T - 0.48) * L / 8))
            rows.append({
                "N": N, "L": L, "T": T, "p_physical": 0.15, "trials": 1000,
                "P_logical": p, "err_low": max(0.0, p - 0.02),
                "err_high": min(1.0, p + 0.02),
                "mean_mcf_cost": 30.0, "mean_sweeps": 15000.0,
            })
    _write(path, DECODE_COLUMNS, rows)
    return path


def write_renyi_csv(path: Path) -> Path:
    cols = ["kind", "N", "L", "T", "q", "x", "r", "realizations", "sweeps",
            "value", "error", "low_statistics_fraction", "spec_hash"]
    rows = []
    for T, eta in ((0.30, 0.4),):
        for r in (2, 4, 8, 12):
            rows.append({
                "kind": "renyi1", "N": 8, "L": 32, "T": T, "q": 1, "x": 0,
                "r": r, "realizations": 16, "sweeps": 250000,
                "value": r ** (-eta), "error": 0.01,
                "low_statistics_fraction": 0.0, "spec_hash": "f" * 12,
            })
    # a cold profile with zero tails exercises the positive-point filter
    for r, v in ((2, 0.05), (4, 0.0), (8, 0.0), (12, 0.0)):
        rows.append({
            "kind": "renyi1", "N": 8, "L": 32, "T": 0.10, "q": 1, "x": 0,
            "r": r, "realizations": 8, "sweeps": 400000,
            "value": v, "error": 0.005,
            "low_statistics_fraction": 0.5, "spec_hash": "f" * 12,
        })
    _write(path, cols, rows)
    return path


def write_wilson_csv(path: Path) -> Path:
    cols = ["kind", "N", "L", "T", "q", "realizations", "sweeps", "value",
            "error", "warning_fraction", "spec_hash"]
    rows = []
    for q in (1, 2, 3, 4):
        for T in (0.2, 0.3, 0.4):
            rows.append({
                "kind": "wilson", "N": 8, "L": 16, "T": T, "q": q,
                "realizations": 300, "sweeps": 40000,
                "value": math.exp(-q * T * 2), "error": 0.01,
                "warning_fraction": 0.0, "spec_hash": "f" * 12,
            })
    _write(path, cols, rows)
    return path


def write_stiffness_csv(path: Path) -> Path:
    cols = ["kind", "N", "L", "T", "realizations", "sweeps", "kappa",
            "kappa_error", "r_squared", "fit_failure_fraction", "spec_hash"]
    rows = [
        {"kind": "stiffness", "N": 8, "L": L, "T": 0.30, "realizations": 40,
         "sweeps": 60000, "kappa": 1.37, "kappa_error": 0.02,
         "r_squared": 0.99, "fit_failure_fraction": 0.0, "spec_hash": "f" * 12}
        for L in (16, 32)
    ]
    _write(path, cols, rows)
    return path


def _write(path: Path, columns, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        writer.writerows(rows)
