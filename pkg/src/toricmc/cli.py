"""Command-line front end for the experiment harness.

Exit codes: 0 success, 2 spec validation failure, 3 partial failure (some
tasks failed or a check did not pass), 4 checkpoint integrity failure.
"""

from __future__ import annotations

import argparse
import sys

from . import harness
from .channel import ChannelError, selfdual_threshold
from .flows import IntegrityError
from .harness import ExperimentSpec, SpecError

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_PARTIAL = 3
EXIT_INTEGRITY = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="toricmc",
        description="Monte Carlo experiments on decohered Z_N toric codes",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute an experiment spec")
    p_run.add_argument("spec", help="path to the spec file")
    p_run.add_argument("--output", help="output directory (overrides spec)")

    p_resume = sub.add_parser("resume", help="continue a checkpointed run")
    p_resume.add_argument("directory", help="run directory with meta.json")

    p_oracle = sub.add_parser(
        "oracle-check",
        help="compare worm sampling against exact enumeration on small systems",
    )
    p_oracle.add_argument("--sweeps", type=int, default=1_000_000)
    p_oracle.add_argument("--realizations", type=int, default=5)
    p_oracle.add_argument("--seed", type=int, default=0)
    p_oracle.add_argument("--tolerance", type=float, default=0.01)
    p_oracle.add_argument("--output", default="runs/oracle-check")
    p_oracle.add_argument("--workers", type=int, default=1)

    p_bench = sub.add_parser(
        "decode-bench", help="logical error rates over an (L, T) grid"
    )
    p_bench.add_argument("--N", type=int, required=True)
    p_bench.add_argument("--L", required=True, help="lattice sizes, e.g. 8,12,16")
    p_bench.add_argument("--T", required=True, help="temperatures, e.g. 0.40,0.45")
    p_bench.add_argument("--trials", type=int, default=1000)
    p_bench.add_argument("--sweeps", type=int, default=2000)
    p_bench.add_argument("--burn-in", type=int, default=None)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--output", default="runs/decode-bench")
    p_bench.add_argument("--workers", type=int, default=1)

    p_thr = sub.add_parser(
        "threshold", help="print the self-dual temperature for a modulus"
    )
    p_thr.add_argument("--N", type=int, required=True)
    return parser


def _report(result: harness.RunResult) -> int:
    print(f"wrote {result.csv_path} ({len(result.rows)} rows, {result.status})")
    if result.failures:
        for task, message in sorted(result.failures.items()):
            print(f"  failed {task}: {message}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def _cmd_run(args) -> int:
    spec = harness.load_spec(args.spec)
    return _report(harness.run(spec, output=args.output))


def _cmd_resume(args) -> int:
    return _report(harness.resume(args.directory))


def _cmd_oracle_check(args) -> int:
    spec = ExperimentSpec(
        kind="oracle_check",
        N=2,  # the kind runs its built-in (N, L, T) case grid
        realizations=args.realizations,
        sweeps=args.sweeps,
        seed=args.seed,
        workers=args.workers,
    )
    result = harness.run(spec, output=args.output)
    worst = 0.0
    ok = True
    for row in result.rows:
        tv = row["tv_distance"]
        worst = max(worst, tv)
        verdict = "ok" if tv < args.tolerance else "FAIL"
        print(
            f"{verdict}  N={row['N']} L={row['L']} T={row['T']:g}"
            f" realization={row['realization']} tv={tv:.3e}"
        )
        ok = ok and tv < args.tolerance
    print(f"worst tv distance {worst:.3e} (tolerance {args.tolerance:g})")
    if result.failures or result.status != "complete":
        return EXIT_PARTIAL
    return EXIT_OK if ok else EXIT_PARTIAL


def _cmd_decode_bench(args) -> int:
    spec = ExperimentSpec(
        kind="decode_bench",
        N=args.N,
        L=harness._parse_ints(args.L),
        T=harness._parse_floats(args.T),
        trials=args.trials,
        sweeps=args.sweeps,
        burn_in=args.burn_in,
        seed=args.seed,
        workers=args.workers,
    )
    return _report(harness.run(spec, output=args.output))


def _cmd_threshold(args) -> int:
    print(f"{selfdual_threshold(args.N):.10g}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "resume": _cmd_resume,
        "oracle-check": _cmd_oracle_check,
        "decode-bench": _cmd_decode_bench,
        "threshold": _cmd_threshold,
    }
    try:
        return handlers[args.command](args)
    except (SpecError, ChannelError) as err:
        print(f"spec error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except IntegrityError as err:
        print(f"integrity error: {err}", file=sys.stderr)
        return EXIT_INTEGRITY


if __name__ == "__main__":
    sys.exit(main())
