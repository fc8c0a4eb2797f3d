"""CLI: render one figure from a sweep CSV or a lemma report JSON."""

from __future__ import annotations

import argparse
import sys

from .figures import KINDS, PlotSpec, SchemaError, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="curvstab-plots",
        description="figures from curvstab sweep CSVs and lemma reports")
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        sp = sub.add_parser(kind)
        sp.add_argument("--input", required=True)
        sp.add_argument("--output", required=True)
        sp.add_argument("--group", default="n,p,family",
                        help="comma-separated grouping columns")
    args = parser.parse_args(argv)
    try:
        spec = PlotSpec(input_path=args.input, kind=args.kind,
                        output_path=args.output,
                        group_keys=tuple(k for k in args.group.split(",") if k))
        result = render(spec)
    except FileNotFoundError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    for warning in result.warnings:
        print(f"warning: {warning}")
    for text in result.annotations:
        print(text)
    print(f"wrote {result.output_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
