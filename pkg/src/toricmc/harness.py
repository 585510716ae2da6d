"""Experiment orchestration: run specs, scheduling, CSV and metadata output.

A run is a deterministic list of tasks derived from the spec.  Each task
owns an RNG stream keyed by its coordinates, writes one row file on
completion, and the final CSV is assembled by sorting all rows, so output
bytes are independent of worker count and completion order.  Row files
double as the checkpoint: resuming skips every task whose file exists.
"""

from __future__ import annotations

import configparser
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field
from hashlib import blake2b
from pathlib import Path

import numpy as np

from . import __version__, streams
from .channel import cosine_channel
from .flows import IntegrityError, sample_reference_flow
from .lattice import annular_regions, cached_lattice


class SpecError(ValueError):
    """Invalid experiment spec; reported before any compute starts."""


KINDS = (
    "coherent_info",
    "cmi",
    "wilson",
    "renyi1",
    "stiffness",
    "relative_entropy",
    "decode_bench",
    "oracle_check",
)

SCHEMA_VERSION = 1

# (N, L) x T grid exercised by the oracle_check kind; small enough to
# enumerate exactly, varied enough to cover dilute and dense regimes.
ORACLE_CASES = tuple(
    (n, l, t) for (n, l) in ((2, 2), (2, 3), (3, 3)) for t in (0.3, 0.6, 2.0)
)

_SPEC_FIELDS = {
    "schema_version", "kind", "N", "L", "T", "realizations", "sweeps",
    "burn_in", "seed", "radii", "q", "r", "x", "sector", "samples", "trials",
    "dual", "workers", "output",
}


@dataclass
class ExperimentSpec:
    kind: str
    N: int
    L: tuple[int, ...] = ()
    T: tuple[float, ...] = ()
    realizations: int = 10
    sweeps: int = 10_000
    burn_in: int | None = None
    seed: int = 0
    radii: tuple[int, int, int] | None = None
    q: tuple[int, ...] | None = None
    r: tuple[int, ...] | None = None
    x: int = 0
    sector: tuple[int, int] = (1, 0)
    samples: int = 50_000
    trials: int = 1000
    dual: bool = False
    workers: int = 1
    output: str | None = None


@dataclass
class RunResult:
    status: str                  # "complete" | "partial"
    csv_path: Path
    meta_path: Path
    rows: list[dict]
    failures: dict[str, str] = field(default_factory=dict)


def _parse_ints(text: str) -> tuple[int, ...]:
    return tuple(int(tok) for tok in text.replace(",", " ").split())


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in text.replace(",", " ").split())


def load_spec(path: str | Path) -> ExperimentSpec:
    """Parse and validate a spec file (INI layout, [experiment] section)."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise SpecError(f"spec file not found: {path}")
    if "experiment" not in parser:
        raise SpecError("spec file needs an [experiment] section")
    section = parser["experiment"]
    unknown = set(section) - {f.lower() for f in _SPEC_FIELDS}
    if unknown:
        raise SpecError(f"unknown spec keys: {sorted(unknown)}")
    if section.get("schema_version", "") != str(SCHEMA_VERSION):
        raise SpecError(
            f"schema_version must be {SCHEMA_VERSION}, got"
            f" {section.get('schema_version')!r}"
        )
    if "kind" not in section or "n" not in section:
        raise SpecError("spec needs at least `kind` and `N`")

    def geti(key, default):
        return section.getint(key) if key in section else default

    spec = ExperimentSpec(
        kind=section.get("kind"),
        N=section.getint("n"),
        L=_parse_ints(section.get("l", "")),
        T=_parse_floats(section.get("t", "")),
        realizations=geti("realizations", 10),
        sweeps=geti("sweeps", 10_000),
        burn_in=section.getint("burn_in") if "burn_in" in section else None,
        seed=geti("seed", 0),
        radii=_parse_ints(section["radii"]) if "radii" in section else None,
        q=_parse_ints(section["q"]) if "q" in section else None,
        r=_parse_ints(section["r"]) if "r" in section else None,
        x=geti("x", 0),
        sector=_parse_ints(section.get("sector", "1 0")),
        samples=geti("samples", 50_000),
        trials=geti("trials", 1000),
        dual=section.getboolean("dual", fallback=False),
        workers=geti("workers", 1),
        output=section.get("output", None),
    )
    validate_spec(spec)
    return spec


def validate_spec(spec: ExperimentSpec) -> None:
    if spec.kind not in KINDS:
        raise SpecError(f"unknown experiment kind {spec.kind!r}; choose from {KINDS}")
    if spec.N < 2:
        raise SpecError("modulus N must be at least 2")
    if spec.realizations < 1 or spec.sweeps < 1:
        raise SpecError("realizations and sweeps must be positive")
    if spec.burn_in is not None and spec.burn_in < 0:
        raise SpecError("burn_in cannot be negative")
    if spec.workers < 1:
        raise SpecError("workers must be positive")
    if spec.kind == "oracle_check":
        return  # runs a built-in case grid
    if not spec.L or not spec.T:
        raise SpecError(f"kind {spec.kind} needs non-empty L and T lists")
    if any(l < 2 for l in spec.L):
        raise SpecError("lattice sizes must be at least 2")
    if any(t <= 0 for t in spec.T):
        raise SpecError("temperatures must be positive")
    if spec.kind == "cmi":
        if spec.radii is None or len(spec.radii) != 3:
            raise SpecError("cmi needs `radii` with three entries")
        ra, rb, rc = spec.radii
        if not 0 < ra < rb < rc:
            raise SpecError(f"radii must be strictly increasing, got {spec.radii}")
        if rc > min(spec.L) // 2:
            raise SpecError(
                f"outer radius {rc} does not fit on the smallest lattice"
                f" (L={min(spec.L)})"
            )
        if spec.samples < 8:
            raise SpecError("cmi needs at least 8 samples")
    if spec.kind == "wilson":
        if not spec.q:
            raise SpecError("wilson needs a `q` list")
        if any(not 1 <= q <= spec.N - 1 for q in spec.q):
            raise SpecError(f"wilson charges must lie in 1..{spec.N - 1}")
    if spec.kind == "renyi1":
        if not spec.r:
            raise SpecError("renyi1 needs an `r` separation list")
        if any(r < 1 or r >= min(spec.L) for r in spec.r):
            raise SpecError("separations must satisfy 1 <= r < min(L)")
        for q in spec.q or (1,):
            if not 1 <= q <= spec.N - 1:
                raise SpecError(f"renyi1 charges must lie in 1..{spec.N - 1}")
    if spec.kind == "relative_entropy":
        if len(spec.sector) != 2 or tuple(s % spec.N for s in spec.sector) == (0, 0):
            raise SpecError("relative_entropy needs a nontrivial `sector` pair")
    if spec.kind == "decode_bench" and spec.trials < 100:
        raise SpecError("decode_bench needs at least 100 trials per point")


def spec_hash(spec: ExperimentSpec) -> str:
    """Hash of every result-relevant field (not workers or output path)."""
    payload = asdict(spec)
    payload.pop("workers")
    payload.pop("output")
    canon = json.dumps(payload, sort_keys=True, default=str)
    return blake2b(canon.encode(), digest_size=8).hexdigest()


def write_spec(spec: ExperimentSpec, path: Path) -> None:
    parser = configparser.ConfigParser()
    items: dict[str, str] = {"schema_version": str(SCHEMA_VERSION)}
    for key, value in asdict(spec).items():
        if value is None:
            continue
        if isinstance(value, (tuple, list)):
            if not value:
                continue
            # repr round-trips floats exactly, so resume re-hashes identically
            items[key] = " ".join(
                repr(v) if isinstance(v, float) else str(v) for v in value
            )
        elif isinstance(value, bool):
            items[key] = "true" if value else "false"
        else:
            items[key] = str(value)
    parser["experiment"] = items
    with open(path, "w") as fh:
        parser.write(fh)


def _tkey(t: float) -> str:
    return f"{t:.10g}"


def build_tasks(spec: ExperimentSpec) -> list[dict]:
    """Deterministic task list; the task id doubles as the row file name."""
    tasks = []

    def add(coords: dict, label: str):
        seed = streams.stream_seed(spec.seed, spec.kind, *sorted(coords.items()))
        tasks.append({"id": label, "seed": seed, **coords})

    if spec.kind == "oracle_check":
        for n, l, t in ORACLE_CASES:
            for i in range(spec.realizations):
                add({"N": n, "L": l, "T": t, "i": i},
                    f"N{n}-L{l}-T{_tkey(t)}-i{i:04d}")
        return tasks

    per_cell_kinds = {"cmi", "decode_bench"}
    for L in spec.L:
        for T in spec.T:
            base = f"L{L}-T{_tkey(T)}"
            if spec.kind in per_cell_kinds:
                add({"L": L, "T": T}, base)
            elif spec.kind == "wilson":
                for q in spec.q:
                    for i in range(spec.realizations):
                        add({"L": L, "T": T, "q": q, "i": i},
                            f"{base}-q{q}-i{i:04d}")
            elif spec.kind == "renyi1":
                for q in spec.q or (1,):
                    for i in range(spec.realizations):
                        add({"L": L, "T": T, "q": q, "i": i},
                            f"{base}-q{q}-i{i:04d}")
            else:
                for i in range(spec.realizations):
                    add({"L": L, "T": T, "i": i}, f"{base}-i{i:04d}")
    return tasks


def execute_task(spec_dict: dict, task: dict) -> list[dict]:
    """Compute one task's raw rows.  Top-level so worker processes can run it."""
    from . import correlators, decoder, diagnostics, oracle, worm

    kind = spec_dict["kind"]
    seed = task["seed"]
    N = task.get("N", spec_dict["N"])
    lat = cached_lattice(task["L"])
    ch = cosine_channel(N, task["T"])
    sweeps = spec_dict["sweeps"]
    burn_in = spec_dict["burn_in"]

    if kind == "coherent_info":
        da = diagnostics.coherent_information(
            ch, lat, realizations=1, sweeps=sweeps, seed=seed,
            burn_in=burn_in, dual=spec_dict["dual"],
        )
        return [{
            "L": task["L"], "T": task["T"], "i": task["i"],
            "value": float(da.values[0]),
            "warning": int(da.metadata["ergodicity_warnings"] > 0),
        }]

    if kind == "wilson":
        da = correlators.wilson_loop(
            ch, lat, task["q"], realizations=1, sweeps=sweeps, seed=seed,
            burn_in=burn_in,
        )
        return [{
            "L": task["L"], "T": task["T"], "q": task["q"], "i": task["i"],
            "value": float(da.values[0]),
            "warning": int(da.metadata["ergodicity_warnings"] > 0),
        }]

    if kind == "renyi1":
        prof = correlators.renyi1_profile(
            ch, lat, x=spec_dict["x"], separations=spec_dict["r"],
            q=task["q"], realizations=1, sweeps=sweeps, seed=seed,
            burn_in=burn_in,
        )
        return [{
            "L": task["L"], "T": task["T"], "q": task["q"], "r": r,
            "i": task["i"], "value": float(prof[r].values[0]),
            "low_statistics": prof[r].metadata["low_statistics_fraction"],
        } for r in spec_dict["r"]]

    if kind == "stiffness":
        kp = sample_reference_flow(ch, lat, streams.stream_seed(seed, "disorder"))
        est = worm.estimate_sector_distribution(
            kp, ch, sweeps, burn_in=burn_in, seed=streams.stream_seed(seed, "chain")
        )
        try:
            fit = diagnostics.fit_stiffness(est)
            row = {"kappa": fit.kappa, "r_squared": fit.r_squared, "failed": 0}
        except diagnostics.FitError:
            row = {"kappa": math.nan, "r_squared": math.nan, "failed": 1}
        return [{"L": task["L"], "T": task["T"], "i": task["i"], **row}]

    if kind == "relative_entropy":
        da = diagnostics.relative_entropy(
            ch, lat, tuple(spec_dict["sector"]), realizations=1, sweeps=sweeps,
            seed=seed, burn_in=burn_in,
        )
        divergent = da.metadata["divergent_fraction"] > 0
        return [{
            "L": task["L"], "T": task["T"], "i": task["i"],
            "value": math.nan if divergent else float(da.values[0]),
            "divergent": int(divergent),
        }]

    if kind == "cmi":
        A, B, C = annular_regions(lat, *spec_dict["radii"])
        da = diagnostics.cmi_sampled(
            ch, lat, A, B, C, spec_dict["samples"], seed=seed,
            interior_cap=lat.vertex_count,
        )
        ra, rb, rc = spec_dict["radii"]
        return [{
            "L": task["L"], "T": task["T"], "r_a": ra, "r_b": rb, "r_c": rc,
            "value": da.mean, "error": da.stderr,
        }]

    if kind == "decode_bench":
        da = decoder.logical_error_rate(
            ch, lat, trials=spec_dict["trials"], sweeps=sweeps, seed=seed,
            burn_in=burn_in,
        )
        md = da.metadata
        return [{
            "L": task["L"], "T": task["T"],
            "p_physical": md["p_physical"], "trials": md["trials"],
            "P_logical": da.mean, "err_low": md["err_low"],
            "err_high": md["err_high"], "mean_mcf_cost": md["mean_mcf_cost"],
            "mean_sweeps": md["mean_sweeps"],
        }]

    if kind == "oracle_check":
        kp = sample_reference_flow(ch, lat, streams.stream_seed(seed, "disorder"))
        exact = oracle.exact_spectrum(kp, ch).sector_probabilities
        est = worm.estimate_sector_distribution(
            kp, ch, sweeps, burn_in=burn_in, seed=streams.stream_seed(seed, "chain")
        )
        tv = 0.5 * float(np.abs(est.probabilities - exact).sum())
        return [{
            "N": N, "L": task["L"], "T": task["T"], "i": task["i"],
            "tv_distance": tv,
        }]

    raise SpecError(f"unknown experiment kind {kind!r}")


def _jackknife(values: list[float]) -> tuple[float, float]:
    arr = np.asarray([v for v in values if not math.isnan(v)], dtype=float)
    if arr.size == 0:
        return math.nan, math.nan
    mean = float(arr.mean())
    if arr.size < 2:
        return mean, math.nan
    loo = (arr.sum() - arr) / (arr.size - 1)
    se = math.sqrt((arr.size - 1) / arr.size * float(((loo - loo.mean()) ** 2).sum()))
    return mean, se


def columns_for(kind: str) -> list[str]:
    if kind == "decode_bench":
        # column contract shared with external consumers; order is load-bearing
        return ["N", "L", "T", "p_physical", "trials", "P_logical",
                "err_low", "err_high", "mean_mcf_cost", "mean_sweeps"]
    common = ["kind", "N", "L", "T"]
    tail = ["spec_hash"]
    per_kind = {
        "coherent_info": ["realizations", "sweeps", "value", "error",
                          "normalized_value", "normalized_error",
                          "warning_fraction"],
        "wilson": ["q", "realizations", "sweeps", "value", "error",
                   "warning_fraction"],
        "renyi1": ["q", "x", "r", "realizations", "sweeps", "value", "error",
                   "low_statistics_fraction"],
        "stiffness": ["realizations", "sweeps", "kappa", "kappa_error",
                      "r_squared", "fit_failure_fraction"],
        "relative_entropy": ["a1", "a2", "realizations", "sweeps", "value",
                             "error", "divergent_fraction"],
        "cmi": ["r_a", "r_b", "r_c", "samples", "value", "error"],
        "oracle_check": ["realization", "sweeps", "tv_distance"],
    }
    return common + per_kind[kind] + tail


def aggregate_rows(spec: ExperimentSpec, raw: list[dict]) -> list[dict]:
    """Collapse per-task rows into final CSV rows, sorted by coordinates."""
    kind = spec.kind
    h = spec_hash(spec)

    if kind == "decode_bench":
        rows = [{"N": spec.N, **r} for r in raw]
        for r in rows:
            r.pop("i", None)
        return sorted(rows, key=lambda r: (r["L"], r["T"]))

    if kind == "oracle_check":
        rows = [{
            "kind": kind, "N": r["N"], "L": r["L"], "T": r["T"],
            "realization": r["i"], "sweeps": spec.sweeps,
            "tv_distance": r["tv_distance"], "spec_hash": h,
        } for r in raw]
        return sorted(rows, key=lambda r: (r["N"], r["L"], r["T"], r["realization"]))

    if kind == "cmi":
        rows = [{"kind": kind, "N": spec.N, **r, "samples": spec.samples,
                 "spec_hash": h} for r in raw]
        return sorted(rows, key=lambda r: (r["L"], r["T"]))

    group_keys = {
        "coherent_info": ("L", "T"),
        "wilson": ("L", "T", "q"),
        "renyi1": ("L", "T", "q", "r"),
        "stiffness": ("L", "T"),
        "relative_entropy": ("L", "T"),
    }[kind]
    groups: dict[tuple, list[dict]] = {}
    for r in raw:
        groups.setdefault(tuple(r[k] for k in group_keys), []).append(r)

    out = []
    for key in sorted(groups):
        members = groups[key]
        coord = dict(zip(group_keys, key))
        row = {"kind": kind, "N": spec.N, **coord,
               "realizations": len(members), "sweeps": spec.sweeps,
               "spec_hash": h}
        if kind == "coherent_info":
            mean, se = _jackknife([m["value"] for m in members])
            norm = 2.0 * math.log(spec.N)
            row.update(value=mean, error=se, normalized_value=mean / norm,
                       normalized_error=se / norm,
                       warning_fraction=float(np.mean([m["warning"] for m in members])))
        elif kind == "wilson":
            mean, se = _jackknife([m["value"] for m in members])
            row.update(value=mean, error=se,
                       warning_fraction=float(np.mean([m["warning"] for m in members])))
        elif kind == "renyi1":
            mean, se = _jackknife([m["value"] for m in members])
            row.update(x=spec.x, value=mean, error=se,
                       low_statistics_fraction=float(
                           np.mean([m["low_statistics"] for m in members])))
        elif kind == "stiffness":
            mean, se = _jackknife([m["kappa"] for m in members])
            r2 = [m["r_squared"] for m in members if not math.isnan(m["r_squared"])]
            row.update(kappa=mean, kappa_error=se,
                       r_squared=float(np.mean(r2)) if r2 else math.nan,
                       fit_failure_fraction=float(
                           np.mean([m["failed"] for m in members])))
        elif kind == "relative_entropy":
            mean, se = _jackknife([m["value"] for m in members])
            row.update(a1=spec.sector[0] % spec.N, a2=spec.sector[1] % spec.N,
                       value=mean, error=se,
                       divergent_fraction=float(
                           np.mean([m["divergent"] for m in members])))
        out.append(row)
    return out


def _format(value) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.10g}"
    return str(value)


def write_csv(path: Path, columns: list[str], rows: list[dict]) -> None:
    tmp = path.with_suffix(".tmp")
    with open(tmp, "w", newline="") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_format(row[c]) for c in columns) + "\n")
    os.replace(tmp, path)


def _write_json_atomic(path: Path, payload: dict) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
    os.replace(tmp, path)


def _worker_count(spec: ExperimentSpec) -> int:
    env = os.environ.get("TORICMC_WORKERS", "").strip()
    if env:
        try:
            count = int(env)
        except ValueError as err:
            raise SpecError(f"TORICMC_WORKERS must be an integer, got {env!r}") from err
        if count < 1:
            raise SpecError("TORICMC_WORKERS must be positive")
        return count
    return spec.workers


def run(spec: ExperimentSpec, output: str | Path | None = None) -> RunResult:
    """Execute all pending tasks, then assemble the CSV and metadata sidecar."""
    validate_spec(spec)
    outdir = Path(output or spec.output or f"runs/{spec.kind}")
    rows_dir = outdir / "rows"
    rows_dir.mkdir(parents=True, exist_ok=True)
    h = spec_hash(spec)
    write_spec(spec, outdir / "spec.ini")

    tasks = build_tasks(spec)
    pending = [t for t in tasks if not (rows_dir / f"{t['id']}.json").exists()]
    spec_dict = asdict(spec)
    failures: dict[str, str] = {}
    started = time.time()

    def record(task: dict, rows: list[dict], elapsed: float) -> None:
        _write_json_atomic(rows_dir / f"{task['id']}.json", {
            "task": task["id"], "spec_hash": h, "seed": task["seed"],
            "rows": rows, "elapsed_seconds": elapsed,
        })
        err_file = rows_dir / f"{task['id']}.error.json"
        if err_file.exists():
            err_file.unlink()

    def record_failure(task: dict, err: Exception) -> None:
        failures[task["id"]] = f"{type(err).__name__}: {err}"
        _write_json_atomic(rows_dir / f"{task['id']}.error.json", {
            "task": task["id"], "spec_hash": h,
            "error": failures[task["id"]],
        })

    workers = _worker_count(spec)
    if workers == 1 or len(pending) <= 1:
        for task in pending:
            t0 = time.time()
            try:
                rows = execute_task(spec_dict, task)
            except Exception as err:  # noqa: BLE001 - per-row failure contract
                record_failure(task, err)
                continue
            record(task, rows, time.time() - t0)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {
                pool.submit(execute_task, spec_dict, task): task for task in pending
            }
            for future in as_completed(futures):
                task = futures[future]
                try:
                    rows = future.result()
                except Exception as err:  # noqa: BLE001
                    record_failure(task, err)
                    continue
                record(task, rows, time.time() - started)

    raw: list[dict] = []
    done = 0
    for task in tasks:
        row_file = rows_dir / f"{task['id']}.json"
        if not row_file.exists():
            continue
        try:
            payload = json.loads(row_file.read_text())
        except json.JSONDecodeError as err:
            raise IntegrityError(f"corrupt row file {row_file}: {err}") from err
        if payload.get("spec_hash") != h:
            raise IntegrityError(
                f"row file {row_file} belongs to a different spec"
            )
        raw.extend(payload["rows"])
        done += 1

    csv_rows = aggregate_rows(spec, raw)
    csv_path = outdir / f"{spec.kind}.csv"
    write_csv(csv_path, columns_for(spec.kind), csv_rows)

    status = "complete" if done == len(tasks) else "partial"
    meta_path = outdir / "meta.json"
    _write_json_atomic(meta_path, {
        "schema_version": SCHEMA_VERSION,
        "kind": spec.kind,
        "spec": spec_dict,
        "spec_hash": h,
        "version": __version__,
        "status": status,
        "tasks": len(tasks),
        "completed": done,
        "failures": failures,
        "task_seeds": {t["id"]: t["seed"] for t in tasks},
        "wall_seconds": time.time() - started,
    })
    return RunResult(
        status=status,
        csv_path=csv_path,
        meta_path=meta_path,
        rows=csv_rows,
        failures=failures,
    )


def resume(directory: str | Path) -> RunResult:
    """Continue a checkpointed run; completed tasks are never recomputed."""
    outdir = Path(directory)
    meta_path = outdir / "meta.json"
    spec_path = outdir / "spec.ini"
    if not meta_path.exists() or not spec_path.exists():
        raise IntegrityError(f"{outdir} is not a run directory (missing meta/spec)")
    try:
        meta = json.loads(meta_path.read_text())
    except json.JSONDecodeError as err:
        raise IntegrityError(f"corrupt metadata in {meta_path}: {err}") from err
    try:
        spec = load_spec(spec_path)
    except SpecError as err:
        raise IntegrityError(f"corrupt spec in {spec_path}: {err}") from err
    if spec_hash(spec) != meta.get("spec_hash"):
        raise IntegrityError(
            "spec file does not match the recorded spec hash; refusing to mix runs"
        )
    return run(spec, output=outdir)
