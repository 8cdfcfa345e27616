"""`render --kind <k> --in <csv> --out <img>`: figure generation CLI.

Exit codes follow the batch driver's conventions: 0 success, 1 data/schema
failure (named missing column), 2 usage errors.
"""

from __future__ import annotations

import argparse
import sys

import matplotlib.pyplot as plt

from .render import SCHEMAS, FigureSpec, SchemaError, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="render", description=__doc__)
    parser.add_argument("--kind", required=True, choices=sorted(SCHEMAS))
    parser.add_argument(
        "--in", dest="inputs", required=True, action="append", help="input CSV (repeatable)"
    )
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--title", default=None)
    try:
        ns = parser.parse_args(sys.argv[1:] if argv is None else argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    spec = FigureSpec(kind=ns.kind, inputs=ns.inputs, output=ns.out, title=ns.title)
    try:
        fig = render(spec)
        plt.close(fig)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {ns.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
