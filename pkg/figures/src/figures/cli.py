"""Command line: figures <kind> --in <csv/json> [--in ...] --out <png/svg>."""

import argparse
import sys

from .render import KINDS, FigureSpec, SchemaError, render


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="figures", description="Render experiment artifacts to images"
    )
    parser.add_argument("kind", choices=sorted(KINDS))
    parser.add_argument(
        "--in", dest="inputs", action="append", required=True,
        help="input CSV/JSON artifact (repeatable)",
    )
    parser.add_argument("--out", required=True, help="output image (.png or .svg)")
    parser.add_argument("--logy", action="store_true")
    args = parser.parse_args(argv)
    try:
        spec = FigureSpec(args.kind, args.inputs, args.out, logy=args.logy)
        out = render(spec)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"missing input: {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
