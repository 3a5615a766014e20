"""Command-line front end: scene generation, pipeline runs, benchmarks, metrics."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import BevLiftError
from .io import METRICS_CSV_HEADER, format_metrics_row, save_point_cloud, save_poses, save_rig
from .pipeline import PipelineConfig, run_benchmark, run_pipeline
from .pooling import POOLING_ENGINES, BevGridSpec, DEFAULT_BEV
from .scene import SCENE_PRESETS, generate_scene


def _add_run_options(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", type=Path, default=None, help="JSON pipeline config; flags override it")
    sub.add_argument("--seed", type=int, default=None, help="master seed")
    sub.add_argument("--engine", choices=POOLING_ENGINES, default=None, help="pooling engine")
    sub.add_argument("--workers", type=int, default=None, help="worker count for scatter_add")
    sub.add_argument("--frames", type=int, default=None, help="number of fused frames")
    sub.add_argument("--oracle-depth", action="store_true", help="use the ground-truth depth downstream")
    sub.add_argument("--preset", choices=SCENE_PRESETS, default=None, help="synthetic scene preset")
    sub.add_argument("--points", type=int, default=None, help="synthetic scene point count")
    sub.add_argument("--views", type=int, default=None, help="synthetic rig view count")
    sub.add_argument("--mode", choices=("expectation", "argmax"), default=None, help="depth scalar extraction")
    sub.add_argument("--out", type=Path, required=True, help="output directory")


def _config_from_args(args) -> PipelineConfig:
    if args.config is not None:
        base = PipelineConfig.from_json(args.config).to_dict()
    else:
        base = PipelineConfig(out_dir=str(args.out)).to_dict()
    overrides = {
        "seed": args.seed,
        "engine": args.engine,
        "workers": args.workers,
        "frames": args.frames,
        "scene_preset": args.preset,
        "scene_points": args.points,
        "scene_views": args.views,
        "depth_mode": args.mode,
    }
    for key, value in overrides.items():
        if value is not None:
            base[key] = value
    if args.oracle_depth:
        base["oracle_depth"] = True
    base["out_dir"] = str(args.out)
    return PipelineConfig.from_dict(base)


def _cmd_gen_scene(args) -> int:
    scene = generate_scene(
        seed=args.seed,
        preset=args.preset,
        num_points=args.points,
        num_views=args.views,
        frames=args.frames,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cloud_path = out / f"cloud.{args.cloud_format}"
    save_point_cloud(scene.cloud, cloud_path)
    save_rig(scene.rig, out / "rig.json")
    save_poses(scene.poses, out / "poses.json")
    (out / "scene.json").write_text(
        json.dumps(
            {
                "preset": scene.preset,
                "seed": scene.seed,
                "num_points": int(scene.cloud.shape[0]),
                "num_views": len(scene.rig),
                "frames": len(scene.poses),
                "surface": scene.surface,
                "cloud": cloud_path.name,
                "rig": "rig.json",
                "poses": "poses.json",
            },
            indent=2,
        )
        + "\n"
    )
    print(f"wrote scene ({scene.preset}, {scene.cloud.shape[0]} points, {len(scene.rig)} views) to {out}")
    return 0


def _cmd_run(args) -> int:
    result = run_pipeline(_config_from_args(args))
    fused = result.fused
    print(f"fused BEV {fused.channels}x{fused.height}x{fused.width} -> {result.bev_path}")
    for report in result.reports:
        line = (
            f"frame {report.frame} view {report.view_id}: "
            f"bce={report.bce_loss:.6f} supervised={report.supervised_pixels}"
        )
        if report.metrics is not None:
            line += f" silog={report.metrics.silog:.4f} abs_rel={report.metrics.abs_rel:.4f}"
        print(line)
    print(f"manifest -> {result.manifest_path}")
    return 0


def _cmd_bench(args) -> int:
    sizes = [int(s) for s in args.points.split(",") if s]
    if args.grid is None:
        spec = DEFAULT_BEV
    else:
        extent = args.grid * args.cell_size / 2.0
        spec = BevGridSpec(-extent, extent, -extent, extent, args.cell_size, -5.0, 3.0)
    report = run_benchmark(
        out_dir=str(args.out),
        sizes=sizes,
        channels=args.channels,
        spec=spec,
        engines=[e for e in args.engine.split(",") if e],
        repeats=args.repeats,
        workers=args.workers,
        seed=args.seed,
    )
    for row in report.rows:
        print(
            f"{row.engine}: {row.points} pts x {row.channels} ch -> "
            f"{row.median_ns / 1e6:.2f} ms ({row.throughput_pps:.3g} pts/s)"
        )
    for s in report.summary:
        print(f"speedup at {s['points']} pts: scatter_add/prefix_sum = {s['speedup']:.2f}")
    print(f"rows -> {report.csv_path}")
    return 0


def _cmd_metrics(args) -> int:
    result = run_pipeline(_config_from_args(args))
    rows = [r.metrics for r in result.reports if r.metrics is not None]
    print(METRICS_CSV_HEADER)
    for m in rows:
        print(format_metrics_row(m))
    print(f"metrics -> {result.metrics_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bevlift",
        description="Deterministic depth-to-BEV harness: scenes, runs, benchmarks, metrics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-scene", help="write a synthetic cloud, rig, and trajectory")
    gen.add_argument("--preset", choices=SCENE_PRESETS, default="wall")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--points", type=int, default=20_000)
    gen.add_argument("--views", type=int, default=2)
    gen.add_argument("--frames", type=int, default=2)
    gen.add_argument("--cloud-format", choices=("csv", "bin"), default="csv")
    gen.add_argument("--out", type=Path, required=True)
    gen.set_defaults(func=_cmd_gen_scene)

    run = sub.add_parser("run", help="execute the full pipeline and write artifacts")
    _add_run_options(run)
    run.set_defaults(func=_cmd_run)

    bench = sub.add_parser("bench", help="time the pooling engines on random instances")
    bench.add_argument("--points", default="100000,1000000", help="comma-separated instance sizes")
    bench.add_argument("--channels", type=int, default=64)
    bench.add_argument("--grid", type=int, default=None, help="square grid side in cells")
    bench.add_argument("--cell-size", type=float, default=0.8)
    bench.add_argument("--engine", default=",".join(POOLING_ENGINES), help="comma-separated engine names")
    bench.add_argument("--workers", type=int, default=1)
    bench.add_argument("--repeats", type=int, default=5)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--out", type=Path, required=True)
    bench.set_defaults(func=_cmd_bench)

    met = sub.add_parser("metrics", help="run the depth chain and print metric rows")
    _add_run_options(met)
    met.set_defaults(func=_cmd_metrics)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BevLiftError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
