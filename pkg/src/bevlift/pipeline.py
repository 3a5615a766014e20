"""End-to-end harness: configuration, the per-view depth chain, fusion, artifacts.

A run walks the whole chain for every frame and view: project the cloud and
build the one-hot depth target, gate the image feature by calibration,
predict the per-pixel depth distribution, report its loss against the
target, lift the gated feature into frustum points, then align frames by
ego motion and pool them into one fused BEV grid.  Image features come from
a seeded generator (this package implements the deterministic core, not a
learned backbone) and the lifted feature is the gated one.

Artifacts land in the output directory: ``bev.bin`` (fused grid),
``metrics.csv`` (one row per frame/view evaluation that had supervision),
and ``manifest.json`` (full config, its hash, seeds, engine, library
versions).  Runs are deterministic: the same config and seed reproduce
``bev.bin`` and ``metrics.csv`` byte for byte for a fixed worker count.  If
anything fails mid-run, files already written are removed so a crashed run
leaves no partial artifacts behind.

With ``oracle_depth`` the predicted distribution is replaced by the target
itself downstream, which pins depth error at zero and makes lifted points
land exactly on the scene surface; it isolates geometry bugs from the
(untrained) head.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import platform
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numba
import numpy as np

from . import __version__
from .depth_gt import make_depth_gt
from .depth_head import DepthHeadParams, bce_depth_loss, camera_param_vector, predict_depth, se_gate
from .errors import BevLiftError, ConfigurationError
from .geometry import EgoPose, RigidTransform
from .grids import TAG_IMAGE_FEATURE, DepthBinSpec, FeatureGrid
from .io import (
    load_head_params,
    load_point_cloud,
    load_poses,
    load_rig,
    save_bev_dump,
    write_benchmark_csv,
    write_metrics_csv,
)
from .lift import lift_view
from .metrics import DepthMetrics, compute_metrics, supervised_depth_pairs
from .pooling import (
    ENGINE_PREFIX_SUM,
    ENGINE_SCATTER_ADD,
    POOLING_ENGINES,
    BenchmarkRow,
    BevGridSpec,
    DEFAULT_BEV,
    benchmark_pooling,
)
from .scene import SCENE_PRESETS, generate_scene, straight_trajectory
from .temporal import fuse_frames

DEFAULT_BINS_DICT = {"d_min": 2.0, "d_max": 58.0, "num_bins": 112}


@dataclass(frozen=True)
class PipelineConfig:
    """Everything a run needs; serializable to JSON and hashable for manifests.

    Either point the config at files (``rig_path`` plus ``cloud_paths``, one
    cloud shared by all frames or one per frame, all in the global frame)
    or leave ``cloud_paths`` empty to generate a synthetic scene from
    ``seed`` and ``scene_preset``.
    """

    out_dir: str
    seed: int = 0
    rig_path: Optional[str] = None
    poses_path: Optional[str] = None
    cloud_paths: tuple = ()
    scene_preset: str = "wall"
    scene_points: int = 20_000
    scene_views: int = 2
    frames: int = 2
    stride: int = 16
    context_channels: int = 8
    head_hidden: int = 32
    head_path: Optional[str] = None
    bins: DepthBinSpec = field(default_factory=lambda: DepthBinSpec(**DEFAULT_BINS_DICT))
    bev: BevGridSpec = field(default_factory=lambda: DEFAULT_BEV)
    engine: str = "sequential"
    workers: int = 1
    oracle_depth: bool = False
    depth_mode: str = "expectation"

    def __post_init__(self):
        if self.frames < 1:
            raise ConfigurationError(f"pipeline: frames must be at least 1, got {self.frames}")
        if self.engine not in POOLING_ENGINES:
            raise ConfigurationError(
                f"pipeline: unknown engine {self.engine!r}, expected one of {POOLING_ENGINES}"
            )
        if self.workers < 1:
            raise ConfigurationError(f"pipeline: workers must be at least 1, got {self.workers}")
        if self.scene_preset not in SCENE_PRESETS:
            raise ConfigurationError(
                f"pipeline: unknown scene preset {self.scene_preset!r}, expected one of {SCENE_PRESETS}"
            )
        if self.depth_mode not in ("expectation", "argmax"):
            raise ConfigurationError(f"pipeline: unknown depth mode {self.depth_mode!r}")
        if self.context_channels < 1:
            raise ConfigurationError(
                f"pipeline: context_channels must be at least 1, got {self.context_channels}"
            )
        object.__setattr__(self, "cloud_paths", tuple(self.cloud_paths))

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["bins"] = dataclasses.asdict(self.bins)
        out["bev"] = dataclasses.asdict(self.bev)
        out["cloud_paths"] = list(self.cloud_paths)
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "PipelineConfig":
        if not isinstance(raw, dict):
            raise ConfigurationError("pipeline: config must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigurationError(f"pipeline: unknown config fields {sorted(unknown)}")
        data = dict(raw)
        if "bins" in data and isinstance(data["bins"], dict):
            data["bins"] = DepthBinSpec(**data["bins"])
        if "bev" in data and isinstance(data["bev"], dict):
            data["bev"] = BevGridSpec(**data["bev"])
        if "cloud_paths" in data:
            data["cloud_paths"] = tuple(data["cloud_paths"])
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigurationError(f"pipeline: bad config: {exc}") from exc

    @classmethod
    def from_json(cls, path) -> "PipelineConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except FileNotFoundError as exc:
            raise ConfigurationError(f"pipeline: config file {path} does not exist") from exc
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"pipeline: config file {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(raw)

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()


@dataclass(frozen=True)
class DepthReport:
    """Per frame/view supervision summary."""

    frame: int
    view_id: int
    bce_loss: float
    supervised_pixels: int
    metrics: Optional[DepthMetrics]


@dataclass(frozen=True)
class RunResult:
    out_dir: str
    bev_path: str
    metrics_path: str
    manifest_path: str
    fused: FeatureGrid
    reports: tuple


def synthesize_context(seed: int, frame: int, view_id: int, channels: int, height: int, width: int) -> FeatureGrid:
    """Stand-in image feature, deterministic in (seed, frame, view)."""
    rng = np.random.default_rng([seed, frame, view_id])
    return FeatureGrid(rng.standard_normal((channels, height, width)), TAG_IMAGE_FEATURE)


def _resolve_scene(config: PipelineConfig):
    """Returns (rig, poses, per-frame global clouds, surface description)."""
    if config.cloud_paths:
        if config.rig_path is None:
            raise ConfigurationError("pipeline: rig_path is required when cloud_paths are given")
        rig = load_rig(config.rig_path)
        poses = load_poses(config.poses_path) if config.poses_path else straight_trajectory(config.frames)
        clouds = [load_point_cloud(p) for p in config.cloud_paths]
        if len(clouds) == 1:
            clouds = clouds * len(poses)
        if len(clouds) != len(poses):
            raise ConfigurationError(
                f"pipeline: {len(config.cloud_paths)} clouds for {len(poses)} frames; "
                "give one shared cloud or one per frame"
            )
        surface = {"kind": "external"}
    else:
        scene = generate_scene(
            seed=config.seed,
            preset=config.scene_preset,
            num_points=config.scene_points,
            num_views=config.scene_views,
            frames=config.frames,
        )
        rig = list(scene.rig)
        poses = list(scene.poses)
        clouds = [scene.cloud] * len(poses)
        surface = scene.surface
    if len(poses) != config.frames:
        raise ConfigurationError(
            f"pipeline: trajectory holds {len(poses)} poses but config.frames is {config.frames}"
        )
    return rig, poses, clouds, surface


def _resolve_head(config: PipelineConfig) -> DepthHeadParams:
    if config.head_path:
        params = load_head_params(config.head_path)
        if params.context_channels != config.context_channels:
            raise ConfigurationError(
                f"pipeline: head file has {params.context_channels} channels, config says "
                f"{config.context_channels}"
            )
        if params.depth_bins != config.bins.num_bins:
            raise ConfigurationError(
                f"pipeline: head file has {params.depth_bins} depth bins, config says "
                f"{config.bins.num_bins}"
            )
        return params
    return DepthHeadParams.seeded(
        config.seed, config.context_channels, config.bins.num_bins, hidden=config.head_hidden
    )


def run_pipeline(config: PipelineConfig) -> RunResult:
    """Execute a full run and write its artifacts; see the module docstring."""
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    created: list[Path] = []
    try:
        rig, poses, clouds, surface = _resolve_scene(config)
        params = _resolve_head(config)
        frames_points = []
        reports = []
        for j, pose in enumerate(poses):
            to_ego = RigidTransform.from_pose(pose).invert()
            cloud_ego = to_ego.apply(clouds[j]) if clouds[j].shape[0] else clouds[j]
            view_points = []
            for cam in rig:
                gt = make_depth_gt(cloud_ego, cam, config.stride, config.bins)
                feat = synthesize_context(
                    config.seed, j, cam.view_id, config.context_channels, gt.height, gt.width
                )
                gated = se_gate(feat, camera_param_vector(cam), params)
                predicted = predict_depth(gated, params)
                depth_used = gt if config.oracle_depth else predicted
                loss = bce_depth_loss(depth_used, gt)
                pairs = supervised_depth_pairs(depth_used, gt, config.bins, config.depth_mode)
                report = DepthReport(
                    frame=j,
                    view_id=cam.view_id,
                    bce_loss=loss.loss,
                    supervised_pixels=loss.supervised_pixels,
                    metrics=compute_metrics(pairs) if pairs is not None else None,
                )
                reports.append(report)
                view_points.append(lift_view(gated, depth_used, cam, config.bins, config.stride))
            frames_points.append((view_points, pose))
        fused = fuse_frames(
            frames_points, config.bev, engine=config.engine, workers=config.workers
        )
        bev_path = out / "bev.bin"
        save_bev_dump(fused, bev_path)
        created.append(bev_path)
        metrics_path = out / "metrics.csv"
        write_metrics_csv([r.metrics for r in reports if r.metrics is not None], metrics_path)
        created.append(metrics_path)
        manifest_path = out / "manifest.json"
        manifest = {
            "tool": "bevlift",
            "version": __version__,
            "config": config.to_dict(),
            "config_sha256": config.config_hash(),
            "seed": config.seed,
            "engine": config.engine,
            "workers": config.workers,
            "surface": surface,
            "fused_channels": fused.channels,
            "bev_rows": fused.height,
            "bev_cols": fused.width,
            "versions": {
                "python": platform.python_version(),
                "numpy": np.__version__,
                "numba": numba.__version__,
            },
            "artifacts": {"bev": bev_path.name, "metrics": metrics_path.name},
            "reports": [
                {
                    "frame": r.frame,
                    "view_id": r.view_id,
                    "bce_loss": r.bce_loss,
                    "supervised_pixels": r.supervised_pixels,
                    "has_metrics": r.metrics is not None,
                }
                for r in reports
            ],
        }
        manifest_path.write_text(json.dumps(manifest, indent=2) + "\n")
        created.append(manifest_path)
        return RunResult(
            out_dir=str(out),
            bev_path=str(bev_path),
            metrics_path=str(metrics_path),
            manifest_path=str(manifest_path),
            fused=fused,
            reports=tuple(reports),
        )
    except BaseException:
        for path in created:
            path.unlink(missing_ok=True)
        raise


def rerun_from_manifest(manifest_path, out_dir: str) -> RunResult:
    """Re-execute the run recorded in a manifest into a fresh directory."""
    path = Path(manifest_path)
    try:
        manifest = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigurationError(f"pipeline: manifest {path} does not exist") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"pipeline: manifest {path} is not valid JSON: {exc}") from exc
    if "config" not in manifest:
        raise ConfigurationError(f"pipeline: manifest {path} has no config section")
    raw = dict(manifest["config"])
    raw["out_dir"] = out_dir
    return run_pipeline(PipelineConfig.from_dict(raw))


def _machine_description() -> str:
    return (
        f"cpus={os.cpu_count()} {platform.system()}-{platform.machine()} "
        f"python-{platform.python_version()} numpy-{np.__version__}"
    )


@dataclass(frozen=True)
class BenchmarkReport:
    rows: tuple
    summary: tuple
    csv_path: str
    summary_path: str
    machine: str


def run_benchmark(
    out_dir: str,
    sizes: Sequence[int] = (100_000, 1_000_000),
    channels: int = 64,
    spec: BevGridSpec = DEFAULT_BEV,
    engines: Sequence[str] = POOLING_ENGINES,
    repeats: int = 5,
    workers: int = 1,
    seed: int = 0,
) -> BenchmarkReport:
    """Sweep instance sizes over the engines and write CSV artifacts.

    ``benchmark.csv`` holds one row per engine and size under the fixed
    header, with the machine description and any prefix-vs-scatter speedups
    appended as ``#`` comment lines.  ``benchmark_summary.csv`` repeats the
    speedups in structured form, one row per size where both engines ran.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    machine = _machine_description()
    all_rows: list[BenchmarkRow] = []
    for i, size in enumerate(sizes):
        all_rows.extend(
            benchmark_pooling(
                num_points=size,
                channels=channels,
                spec=spec,
                seed=seed + i,
                engines=engines,
                repeats=repeats,
                workers=workers,
            )
        )
    summary = []
    comments = [f"machine: {machine}"]
    for size in sizes:
        by_engine = {r.engine: r for r in all_rows if r.points == size}
        if ENGINE_PREFIX_SUM in by_engine and ENGINE_SCATTER_ADD in by_engine:
            prefix = by_engine[ENGINE_PREFIX_SUM]
            scatter = by_engine[ENGINE_SCATTER_ADD]
            speedup = scatter.throughput_pps / prefix.throughput_pps
            summary.append(
                {
                    "points": size,
                    "channels": channels,
                    "rows": spec.rows,
                    "cols": spec.cols,
                    "workers": scatter.workers,
                    "prefix_sum_median_ns": prefix.median_ns,
                    "scatter_add_median_ns": scatter.median_ns,
                    "speedup": speedup,
                    "machine": machine,
                }
            )
            comments.append(
                f"speedup points={size}: scatter_add/prefix_sum = {speedup:.2f}"
            )
    csv_path = out / "benchmark.csv"
    write_benchmark_csv(all_rows, csv_path, comments=comments)
    summary_path = out / "benchmark_summary.csv"
    header = "points,channels,rows,cols,workers,prefix_sum_median_ns,scatter_add_median_ns,speedup,machine"
    lines = [header] + [
        f"{s['points']},{s['channels']},{s['rows']},{s['cols']},{s['workers']},"
        f"{s['prefix_sum_median_ns']},{s['scatter_add_median_ns']},{s['speedup']:.3f},{s['machine']}"
        for s in summary
    ]
    summary_path.write_text("\n".join(lines) + "\n")
    return BenchmarkReport(
        rows=tuple(all_rows),
        summary=tuple(summary),
        csv_path=str(csv_path),
        summary_path=str(summary_path),
        machine=machine,
    )
