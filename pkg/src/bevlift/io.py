"""File formats: rigs, poses, point clouds, head parameters, BEV dumps, CSV reports.

Binary layouts (all little-endian):

* point cloud ``.bin``: consecutive float32 ``x y z`` triplets, nothing else;
* head parameters: magic ``DHP1``, three uint32 ``hidden, channels, bins``,
  then float32 payloads of ``mlp_w1, mlp_b1, mlp_w2, mlp_b2, proj_w, proj_b``
  flattened row-major in that order;
* BEV dump: magic ``BEVF``, three uint32 ``channels, rows, cols``, then the
  float32 grid flattened row-major (channel-major, then rows, then cols).

JSON rigs are arrays of objects with ``view_id``, ``width``, ``height``,
``intrinsics`` (9 numbers row-major), ``rotation`` (9), ``translation`` (3).
JSON pose files are arrays of ``rotation``, ``translation``, ``timestamp``
(integer microseconds), ordered oldest to newest.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigurationError
from .depth_head import DepthHeadParams
from .geometry import CameraView, EgoPose
from .grids import TAG_BEV_FEATURE, FeatureGrid
from .metrics import DepthMetrics
from .pooling import BenchmarkRow

POINT_CLOUD_EXTENSIONS = (".csv", ".bin")
HEAD_MAGIC = b"DHP1"
BEV_MAGIC = b"BEVF"
METRICS_CSV_HEADER = "silog,abs_rel,sq_rel,log10,rmse,count"
BENCHMARK_CSV_HEADER = "engine,points,channels,rows,cols,workers,median_ns,throughput_pps"


def _float_list(obj, n: int, name: str, path) -> list[float]:
    if not isinstance(obj, list) or len(obj) != n:
        raise ConfigurationError(f"io: {name} in {path} must be a list of {n} numbers")
    try:
        return [float(x) for x in obj]
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"io: {name} in {path} holds a non-numeric value") from exc


def load_rig(path) -> list[CameraView]:
    """Read a JSON camera rig; validates every view on construction."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigurationError(f"io: rig file {path} does not exist") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"io: rig file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, list) or not raw:
        raise ConfigurationError(f"io: rig file {path} must hold a nonempty array of views")
    views = []
    for i, entry in enumerate(raw):
        if not isinstance(entry, dict):
            raise ConfigurationError(f"io: rig entry {i} in {path} must be an object")
        try:
            views.append(
                CameraView(
                    intrinsics=np.array(_float_list(entry["intrinsics"], 9, f"view {i} intrinsics", path)).reshape(3, 3),
                    rotation=np.array(_float_list(entry["rotation"], 9, f"view {i} rotation", path)).reshape(3, 3),
                    translation=np.array(_float_list(entry["translation"], 3, f"view {i} translation", path)),
                    image_width=int(entry["width"]),
                    image_height=int(entry["height"]),
                    view_id=int(entry.get("view_id", i)),
                )
            )
        except KeyError as exc:
            raise ConfigurationError(f"io: rig entry {i} in {path} is missing field {exc}") from exc
    return views


def save_rig(views: Sequence[CameraView], path) -> None:
    payload = [
        {
            "view_id": v.view_id,
            "width": v.image_width,
            "height": v.image_height,
            "intrinsics": v.intrinsics.ravel().tolist(),
            "rotation": v.rotation.ravel().tolist(),
            "translation": v.translation.tolist(),
        }
        for v in views
    ]
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def load_poses(path) -> list[EgoPose]:
    """Read a JSON pose trajectory, oldest to newest."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigurationError(f"io: pose file {path} does not exist") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"io: pose file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, list) or not raw:
        raise ConfigurationError(f"io: pose file {path} must hold a nonempty array of poses")
    poses = []
    for i, entry in enumerate(raw):
        if not isinstance(entry, dict):
            raise ConfigurationError(f"io: pose entry {i} in {path} must be an object")
        try:
            poses.append(
                EgoPose(
                    rotation=np.array(_float_list(entry["rotation"], 9, f"pose {i} rotation", path)).reshape(3, 3),
                    translation=np.array(_float_list(entry["translation"], 3, f"pose {i} translation", path)),
                    timestamp_us=int(entry.get("timestamp", 0)),
                )
            )
        except KeyError as exc:
            raise ConfigurationError(f"io: pose entry {i} in {path} is missing field {exc}") from exc
    return poses


def save_poses(poses: Sequence[EgoPose], path) -> None:
    payload = [
        {
            "rotation": p.rotation.ravel().tolist(),
            "translation": p.translation.tolist(),
            "timestamp": p.timestamp_us,
        }
        for p in poses
    ]
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def load_point_cloud(path) -> np.ndarray:
    """Read an ``(n, 3)`` cloud; format chosen by extension (.csv or .bin)."""
    path = Path(path)
    if path.suffix not in POINT_CLOUD_EXTENSIONS:
        raise ConfigurationError(
            f"io: unsupported point cloud extension {path.suffix!r}, expected one of {POINT_CLOUD_EXTENSIONS}"
        )
    try:
        raw = path.read_bytes()
    except FileNotFoundError as exc:
        raise ConfigurationError(f"io: point cloud {path} does not exist") from exc
    if path.suffix == ".bin":
        if len(raw) % 12:
            raise ConfigurationError(
                f"io: binary cloud {path} holds {len(raw)} bytes, not a multiple of 12"
            )
        return np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(-1, 3)
    text = raw.decode()
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise ConfigurationError(f"io: {path}:{lineno} has {len(parts)} fields, expected x,y,z")
        try:
            rows.append([float(p) for p in parts])
        except ValueError as exc:
            raise ConfigurationError(f"io: {path}:{lineno} holds a non-numeric field") from exc
    return np.array(rows, dtype=np.float64).reshape(-1, 3)


def save_point_cloud(cloud: np.ndarray, path) -> None:
    """Write an ``(n, 3)`` cloud; format chosen by extension (.csv or .bin)."""
    path = Path(path)
    pts = np.asarray(cloud, dtype=np.float64)
    if pts.size == 0:
        pts = pts.reshape(0, 3)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ConfigurationError(f"io: point cloud must be (n, 3), got {pts.shape}")
    if path.suffix == ".csv":
        # repr of a Python float round-trips the exact double
        lines = [f"{float(x)!r},{float(y)!r},{float(z)!r}" for x, y, z in pts]
        path.write_text("\n".join(lines) + ("\n" if lines else ""))
    elif path.suffix == ".bin":
        path.write_bytes(pts.astype("<f4").tobytes())
    else:
        raise ConfigurationError(
            f"io: unsupported point cloud extension {path.suffix!r}, expected one of {POINT_CLOUD_EXTENSIONS}"
        )


def save_head_params(params: DepthHeadParams, path) -> None:
    header = HEAD_MAGIC + struct.pack(
        "<III", params.hidden_units, params.context_channels, params.depth_bins
    )
    payload = np.concatenate(
        [
            params.mlp_w1.ravel(),
            params.mlp_b1,
            params.mlp_w2.ravel(),
            params.mlp_b2,
            params.proj_w.ravel(),
            params.proj_b,
        ]
    ).astype("<f4")
    Path(path).write_bytes(header + payload.tobytes())


def load_head_params(path) -> DepthHeadParams:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except FileNotFoundError as exc:
        raise ConfigurationError(f"io: head parameter file {path} does not exist") from exc
    if len(raw) < 16 or raw[:4] != HEAD_MAGIC:
        raise ConfigurationError(f"io: {path} is not a head parameter file (bad magic)")
    hidden, channels, bins = struct.unpack("<III", raw[4:16])
    from .depth_head import CAM_VEC_LEN

    counts = [hidden * CAM_VEC_LEN, hidden, channels * hidden, channels, bins * channels, bins]
    expected = 16 + 4 * sum(counts)
    if len(raw) != expected:
        raise ConfigurationError(
            f"io: {path} holds {len(raw)} bytes, expected {expected} for "
            f"hidden={hidden} channels={channels} bins={bins}"
        )
    flat = np.frombuffer(raw[16:], dtype="<f4").astype(np.float64)
    parts = []
    offset = 0
    for count in counts:
        parts.append(flat[offset : offset + count])
        offset += count
    return DepthHeadParams(
        mlp_w1=parts[0].reshape(hidden, CAM_VEC_LEN),
        mlp_b1=parts[1],
        mlp_w2=parts[2].reshape(channels, hidden),
        mlp_b2=parts[3],
        proj_w=parts[4].reshape(bins, channels),
        proj_b=parts[5],
    )


def save_bev_dump(grid: FeatureGrid, path) -> None:
    header = BEV_MAGIC + struct.pack("<III", grid.channels, grid.height, grid.width)
    Path(path).write_bytes(header + grid.data.astype("<f4").tobytes())


def load_bev_dump(path) -> FeatureGrid:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except FileNotFoundError as exc:
        raise ConfigurationError(f"io: BEV dump {path} does not exist") from exc
    if len(raw) < 16 or raw[:4] != BEV_MAGIC:
        raise ConfigurationError(f"io: {path} is not a BEV dump (bad magic)")
    channels, rows, cols = struct.unpack("<III", raw[4:16])
    expected = 16 + 4 * channels * rows * cols
    if len(raw) != expected:
        raise ConfigurationError(
            f"io: {path} holds {len(raw)} bytes, expected {expected} for "
            f"{channels}x{rows}x{cols}"
        )
    data = np.frombuffer(raw[16:], dtype="<f4").astype(np.float64).reshape(channels, rows, cols)
    return FeatureGrid(data, TAG_BEV_FEATURE)


def format_metrics_row(m: DepthMetrics) -> str:
    return f"{m.silog!r},{m.abs_rel!r},{m.sq_rel!r},{m.log10!r},{m.rmse!r},{m.count}"


def write_metrics_csv(rows: Sequence[DepthMetrics], path) -> None:
    lines = [METRICS_CSV_HEADER] + [format_metrics_row(m) for m in rows]
    Path(path).write_text("\n".join(lines) + "\n")


def format_benchmark_row(row: BenchmarkRow) -> str:
    return (
        f"{row.engine},{row.points},{row.channels},{row.rows},{row.cols},"
        f"{row.workers},{row.median_ns},{row.throughput_pps:.1f}"
    )


def write_benchmark_csv(rows: Sequence[BenchmarkRow], path, comments: Sequence[str] = ()) -> None:
    """Rows under the fixed header; trailing ``#`` lines carry free-form notes."""
    lines = [BENCHMARK_CSV_HEADER] + [format_benchmark_row(r) for r in rows]
    lines += [f"# {c}" for c in comments]
    Path(path).write_text("\n".join(lines) + "\n")
