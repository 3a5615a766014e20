#!/usr/bin/env python3
"""Measure the pooling engines against each other at full size.

Runs the standard sweep (default one million points, 64 channels, the
128x128 default grid) and prints the per-engine medians plus the
scatter-add vs prefix-sum throughput ratio.  CSV artifacts land in --out.

    $ python3 scripts/pooling_speedup.py --out /tmp/bench
    $ python3 scripts/pooling_speedup.py --points 250000 --workers 4
"""

import argparse
import os
import sys

from bevlift import DEFAULT_BEV, BevGridSpec, run_benchmark


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--points", type=int, nargs="+", default=[1_000_000])
    parser.add_argument("--channels", type=int, default=64)
    parser.add_argument("--grid", type=int, default=None, help="cells per side (default 128)")
    parser.add_argument("--cell-size", type=float, default=0.8)
    parser.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="bench_out")
    args = parser.parse_args(argv)

    if args.grid is None:
        spec = DEFAULT_BEV
    else:
        extent = args.grid * args.cell_size / 2.0
        spec = BevGridSpec(-extent, extent, -extent, extent, args.cell_size, -5.0, 3.0)

    report = run_benchmark(
        out_dir=args.out,
        sizes=tuple(args.points),
        channels=args.channels,
        spec=spec,
        repeats=args.repeats,
        workers=args.workers,
        seed=args.seed,
    )
    print(f"machine: {report.machine}")
    for row in report.rows:
        print(
            f"{row.engine:12s} {row.points:>9d} pts  "
            f"median {row.median_ns / 1e6:9.3f} ms  "
            f"{row.throughput_pps / 1e6:8.2f} Mpts/s"
        )
    for entry in report.summary:
        print(
            f"speedup at {entry['points']} pts: "
            f"scatter_add/prefix_sum = {entry['speedup']:.2f}x (workers={entry['workers']})"
        )
    print(f"wrote {report.csv_path} and {report.summary_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
