"""figplots command line: render one figure from simulation CSV files."""

from __future__ import annotations

import argparse
import sys

from . import plots


def build_parser():
    ap = argparse.ArgumentParser(
        prog="figplots",
        description="Render heatmaps, trajectory panels, or mode portraits "
                    "from simulation CSV outputs.",
    )
    ap.add_argument("kind", choices=plots.KINDS)
    ap.add_argument("--csv", action="append", required=True, metavar="PATH",
                    help="input CSV; repeat to add an overlay file "
                         "(n_star/n_hash columns)")
    ap.add_argument("--out", required=True, metavar="FILE.png",
                    help="output image path")
    ap.add_argument("--metric", default="e_battery",
                    help="column drawn by heatmaps (default e_battery)")
    ap.add_argument("--dpi", type=int, default=plots.DPI)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    spec = plots.PlotSpec(
        csv_paths=tuple(args.csv),
        kind=args.kind,
        out_path=args.out,
        metric=args.metric,
        dpi=args.dpi,
    )
    print(plots.render(spec))
    return 0


if __name__ == "__main__":
    sys.exit(main())
