"""Ground-truth depth targets: min-pooled sparse maps and one-hot bin tensors.

Projected points are reduced to one depth per feature-map cell by taking the
minimum over each ``stride x stride`` pixel block, which keeps the nearest
surface when several hits fall in the same cell.  The sparse result is then
expanded to a one-hot tensor over depth bins; cells without any projected
point stay all-zero and are excluded from supervision downstream.
"""

from __future__ import annotations

from dataclasses import dataclass
from types import MappingProxyType

import numpy as np

from .errors import ConfigurationError, ValidationError
from .geometry import CameraView, project_points
from .grids import TAG_DEPTH_ONEHOT, DepthBinSpec, FeatureGrid


@dataclass(frozen=True)
class SparseDepthMap:
    """Minimum metric depth per feature-map cell, keyed by (row, col)."""

    height: int
    width: int
    stride: int
    entries: dict

    def __post_init__(self):
        if self.height < 1 or self.width < 1 or self.stride < 1:
            raise ConfigurationError(
                f"depth_gt: map dimensions must be positive, got {self.height}x{self.width} stride {self.stride}"
            )
        for (row, col), depth in self.entries.items():
            if not (0 <= row < self.height and 0 <= col < self.width):
                raise ValidationError(f"depth_gt: cell ({row}, {col}) outside {self.height}x{self.width} map")
            if not (depth > 0.0 and np.isfinite(depth)):
                raise ValidationError(f"depth_gt: cell ({row}, {col}) has invalid depth {depth!r}")
        object.__setattr__(self, "entries", MappingProxyType(dict(self.entries)))

    @property
    def occupied(self) -> int:
        return len(self.entries)


def min_pool(points, stride: int, out_height: int, out_width: int) -> SparseDepthMap:
    """Reduce 2.5D points to the minimum depth per ``stride x stride`` cell.

    ``points`` is an ``(n, 3)`` array (or list of ``Point25D``) of
    ``(u, v, d)`` rows.  Every point must satisfy
    ``0 <= u < out_width * stride`` and ``0 <= v < out_height * stride``;
    the first offending index is reported otherwise.
    """
    if stride < 1:
        raise ConfigurationError(f"depth_gt: stride must be at least 1, got {stride}")
    if out_height < 1 or out_width < 1:
        raise ConfigurationError(f"depth_gt: output size must be positive, got {out_height}x{out_width}")
    pts = np.asarray(points, dtype=np.float64)
    if pts.size == 0:
        return SparseDepthMap(out_height, out_width, stride, {})
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValidationError(f"depth_gt: expected (n, 3) image-space points, got {pts.shape}")
    u, v, d = pts[:, 0], pts[:, 1], pts[:, 2]
    bad = ~(
        (u >= 0.0)
        & (u < out_width * stride)
        & (v >= 0.0)
        & (v < out_height * stride)
        & np.isfinite(u)
        & np.isfinite(v)
    )
    if np.any(bad):
        i = int(np.nonzero(bad)[0][0])
        raise ValidationError(
            f"depth_gt: point {i} at (u={u[i]!r}, v={v[i]!r}) lies outside the "
            f"{out_width * stride}x{out_height * stride} pixel range"
        )
    if np.any(~(d > 0.0) | ~np.isfinite(d)):
        i = int(np.nonzero(~(d > 0.0) | ~np.isfinite(d))[0][0])
        raise ValidationError(f"depth_gt: point {i} has nonpositive depth {d[i]!r}")
    col = np.floor(u / stride).astype(np.int64)
    row = np.floor(v / stride).astype(np.int64)
    # Bounds were checked on pixels; clip guards the floor against edge rounding.
    col = np.clip(col, 0, out_width - 1)
    row = np.clip(row, 0, out_height - 1)
    flat = row * out_width + col
    best = np.full(out_height * out_width, np.inf)
    np.minimum.at(best, flat, d)
    occupied = np.nonzero(np.isfinite(best))[0]
    entries = {
        (int(c // out_width), int(c % out_width)): float(best[c]) for c in occupied
    }
    return SparseDepthMap(out_height, out_width, stride, entries)


def one_hot_depth(depth_map: SparseDepthMap, bins: DepthBinSpec) -> FeatureGrid:
    """Expand a sparse depth map to a one-hot tensor over depth bins.

    Occupied cells whose depth falls outside ``[d_min, d_max)`` produce an
    all-zero column, exactly like never-hit cells.
    """
    data = np.zeros((bins.num_bins, depth_map.height, depth_map.width))
    for (row, col), depth in depth_map.entries.items():
        j = int(bins.index_of(depth))
        if j >= 0:
            data[j, row, col] = 1.0
    return FeatureGrid(data, TAG_DEPTH_ONEHOT)


def make_depth_gt(cloud, cam: CameraView, stride: int, bins: DepthBinSpec) -> FeatureGrid:
    """Project a cloud into one view and build its one-hot depth target.

    The image size must be divisible by ``stride``.  An empty cloud, or one
    with no point retained by the projection, yields an all-zero grid.
    """
    if stride < 1:
        raise ConfigurationError(f"depth_gt: stride must be at least 1, got {stride}")
    if cam.image_width % stride or cam.image_height % stride:
        raise ConfigurationError(
            f"depth_gt: image size {cam.image_width}x{cam.image_height} is not divisible by stride {stride}"
        )
    out_h = cam.image_height // stride
    out_w = cam.image_width // stride
    pts = np.asarray(cloud, dtype=np.float64)
    if pts.size == 0:
        return FeatureGrid.zeros(bins.num_bins, out_h, out_w, TAG_DEPTH_ONEHOT)
    uvd, _ = project_points(pts, cam)
    if uvd.shape[0] == 0:
        return FeatureGrid.zeros(bins.num_bins, out_h, out_w, TAG_DEPTH_ONEHOT)
    return one_hot_depth(min_pool(uvd, stride, out_h, out_w), bins)
