"""CLI: pmlimit-plots render <report_dir> --out <fig_dir> [--format png|svg]"""

from __future__ import annotations

import argparse
import sys

from .bundle import MissingSeries, SchemaMismatch, load_bundle
from .render import render_sweep


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pmlimit-plots", description="Render figures from a sweep report"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_render = sub.add_parser("render", help="render all figure families")
    p_render.add_argument("report_dir", help="harness output directory")
    p_render.add_argument("--out", required=True, help="figure output directory")
    p_render.add_argument("--format", choices=("png", "svg"), default="png")
    args = parser.parse_args(argv)

    try:
        bundle = load_bundle(args.report_dir)
    except SchemaMismatch as exc:
        print(f"schema mismatch: {exc}", file=sys.stderr)
        return 2
    except MissingSeries as exc:
        print(f"missing data: {exc}", file=sys.stderr)
        return 2

    result = render_sweep(bundle, args.out, fmt=args.format)
    for path in result.written:
        print(f"wrote {path}")
    for figure, reason in result.skipped:
        print(f"skipped {figure}: {reason}")
    if result.residual_slope is not None:
        print(f"fitted residual slope: {result.residual_slope:.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
