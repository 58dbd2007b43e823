"""Command-line renderer: stepgl-plots render --kind ... --input ... --output ..."""

from __future__ import annotations

import argparse
import json
import sys

from .readers import EmptyInputError, SchemaError
from .figures import KINDS, FigureSpec, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stepgl-plots",
        description="Render static figures from stepgl output files")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("render", help="render one figure")
    p.add_argument("--kind", required=True, choices=KINDS)
    p.add_argument("--input", required=True, action="append",
                   help="input file (repeatable)")
    p.add_argument("--output", required=True, help="image file to write")
    p.add_argument("--style", default="{}",
                   help="JSON style options (threshold, ell, cmap)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        style = json.loads(args.style)
        spec = FigureSpec(kind=args.kind, inputs=args.input,
                          output=args.output, style=style)
        path = render(spec)
    except (SchemaError, EmptyInputError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
