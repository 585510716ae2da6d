"""Command line entry: one CSV-to-image rendering per invocation."""

import argparse
import sys

from .io import SchemaError, read_rows
from .panels import RENDERERS, render

EXIT_OK = 0
EXIT_VALIDATION = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plot", description="render a panel from result CSVs"
    )
    parser.add_argument("--kind", required=True, choices=sorted(RENDERERS))
    parser.add_argument(
        "--in", dest="inputs", nargs="+", required=True, metavar="CSV",
        help="one or more result CSV files",
    )
    parser.add_argument("--out", required=True, help="output image (.png or .svg)")
    parser.add_argument(
        "--band", default=None, metavar="LO,HI",
        help="shade a temperature window (coherent_info panels)",
    )
    parser.add_argument(
        "--no-band", action="store_true",
        help="suppress the default shaded window",
    )
    return parser


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    # tolerate the subcommand-style spelling `plot --kind ...`
    if argv and argv[0] == "plot":
        argv = argv[1:]
    args = _build_parser().parse_args(argv)
    kwargs = {}
    if args.kind == "coherent_info":
        if args.band is not None:
            try:
                lo, hi = (float(tok) for tok in args.band.split(","))
            except ValueError:
                print(f"plot: bad --band {args.band!r}, expected LO,HI", file=sys.stderr)
                return EXIT_VALIDATION
            kwargs["band"] = (lo, hi)
        elif args.no_band:
            kwargs["band"] = ()
    try:
        rows = read_rows(args.kind, args.inputs)
        out = render(args.kind, rows, args.out, **kwargs)
    except SchemaError as err:
        print(f"plot: schema error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    print(f"wrote {out}")
    return EXIT_OK


def entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
