"""Command-line entry point: results CSV in, figure files out."""
from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from .figures import IMAGE_FORMATS, EmptyFilterError, SchemaError, render_all


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lastgen-plot",
        description="Render gamma-vs-offset-spread figures from a sweep "
                    "results CSV (one per skew-bound group).")
    parser.add_argument("--csv", required=True, metavar="PATH",
                        help="results CSV produced by the lastgen sweep")
    parser.add_argument("--out", required=True, metavar="DIR",
                        help="directory to write figures into")
    parser.add_argument("--format", choices=IMAGE_FORMATS, default="svg",
                        help="image format (default: svg)")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_arg_parser().parse_args(argv)
    try:
        written = render_all(args.csv, args.out, args.format)
    except (SchemaError, EmptyFilterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    for path in written:
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
