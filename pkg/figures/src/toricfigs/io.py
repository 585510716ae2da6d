"""CSV ingestion against the result column contract."""

import csv
from pathlib import Path


class SchemaError(ValueError):
    """The CSV does not match the documented column contract."""


REQUIRED_COLUMNS = {
    "coherent_info": (
        "N", "L", "T", "value", "error", "normalized_value", "normalized_error",
    ),
    "wilson": ("N", "L", "T", "q", "value", "error"),
    "renyi1": ("N", "L", "T", "q", "x", "r", "value", "error"),
    "stiffness": ("N", "L", "T", "kappa", "kappa_error", "r_squared"),
    "decode_bench": (
        "N", "L", "T", "p_physical", "trials", "P_logical",
        "err_low", "err_high", "mean_mcf_cost", "mean_sweeps",
    ),
}

_INT_FIELDS = {"N", "L", "q", "x", "r", "trials", "realizations", "sweeps"}


def _convert(column: str, text: str):
    if column in _INT_FIELDS:
        return int(text)
    try:
        return float(text)
    except ValueError:
        return text


def read_rows(kind: str, paths) -> list[dict]:
    """Rows from one or more CSVs, schema-checked and typed.

    Multiple files concatenate; each must carry every required column for
    `kind`. Extra columns pass through untouched.
    """
    if kind not in REQUIRED_COLUMNS:
        raise SchemaError(
            f"unknown kind {kind!r}; expected one of {sorted(REQUIRED_COLUMNS)}"
        )
    required = REQUIRED_COLUMNS[kind]
    rows: list[dict] = []
    for path in paths:
        path = Path(path)
        if not path.exists():
            raise SchemaError(f"input file not found: {path}")
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            missing = [c for c in required if c not in header]
            if missing:
                raise SchemaError(
                    f"{path.name} is missing column '{missing[0]}'"
                    f" (required for kind {kind!r})"
                )
            for raw in reader:
                rows.append({k: _convert(k, v) for k, v in raw.items() if k})
    if not rows:
        raise SchemaError("no data rows in input")
    return rows


def group_by(rows: list[dict], *keys):
    """Sorted (key_tuple, subrows) pairs; deterministic ordering."""
    buckets: dict[tuple, list[dict]] = {}
    for row in rows:
        buckets.setdefault(tuple(row[k] for k in keys), []).append(row)
    return sorted(buckets.items())
