"""render CLI: turn experiment CSVs into figure files.

Examples:
    render --kind variance --in variance.csv --out variance.png
    render --kind curves --in seed_0/metrics.csv --in seed_1/metrics.csv \
           --value approx_ratio --out curves.png
    render --kind bars --in qrl:4:eval4.csv --in qaoa_unbalanced:4:qaoa4.csv \
           --metric p_optimal --out bars.png
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .render import BarInput, FigureSpec, MissingColumnsError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="render", description=__doc__)
    parser.add_argument("--kind", required=True,
                        choices=("variance", "curves", "bars"))
    parser.add_argument("--in", dest="inputs", action="append", required=True,
                        metavar="PATH|SERIES:SIZE:PATH",
                        help="input CSV; bars use series:size:path triplets")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--value", default="approx_ratio",
                        help="metrics column plotted by curves")
    parser.add_argument("--metric", default="p_optimal",
                        choices=("p_optimal", "p_valid"),
                        help="column aggregated by bars")
    parser.add_argument("--label", action="append", dest="labels")
    parser.add_argument("--title", default="")
    parser.add_argument("--dpi", type=int, default=150)
    return parser


def spec_from_args(args: argparse.Namespace) -> FigureSpec:
    spec = FigureSpec(kind=args.kind, output=Path(args.out), labels=args.labels,
                      value_column=args.value, metric=args.metric,
                      title=args.title, dpi=args.dpi)
    if args.kind == "bars":
        for item in args.inputs:
            parts = item.split(":", 2)
            if len(parts) != 3:
                raise ValueError(f"bars input must be series:size:path, got {item!r}")
            spec.bar_inputs.append(BarInput(series=parts[0], size=int(parts[1]),
                                            path=Path(parts[2])))
    else:
        spec.inputs = [Path(p) for p in args.inputs]
    return spec


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        out = render(spec_from_args(args))
    except MissingColumnsError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (ValueError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
