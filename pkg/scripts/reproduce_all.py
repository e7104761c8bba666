#!/usr/bin/env python3
"""Emit the CSV/JSON data behind every reference figure.

Usage: python3 scripts/reproduce_all.py OUTDIR [--figures fig2 fig3 ...] [--workers N]

The slow entries (fig4, fig5, fig7, fig8, fig9) each take tens of minutes
on one core; pass an explicit --figures list for a quick look.
"""

import argparse
from pathlib import Path

from kpo.harness import FIGURE_IDS, default_workers, reproduce


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("outdir")
    parser.add_argument("--figures", nargs="+", default=list(FIGURE_IDS[:-1]))
    parser.add_argument("--workers", type=int, default=default_workers())
    args = parser.parse_args()
    for fig in args.figures:
        files = reproduce(fig, Path(args.outdir) / fig, workers=args.workers)
        print(f"{fig}: {len(files)} files")
        for f in files:
            print(f"  {f}")


if __name__ == "__main__":
    main()
