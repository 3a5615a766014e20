"""Outer-product lift of image features into a metric point cloud.

Every feature-map pixel spawns one point per depth bin.  The point's feature
row is the pixel's feature column scaled by the probability mass of that bin,
and its location is the pixel center unprojected at the bin's center depth.
Rows are ordered bin-major: index ``(j, h, w)`` maps to row
``(j * height + h) * width + w``.  The output is dense, one row per
bin/pixel pair, including rows whose scale is zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ValidationError
from .geometry import CameraView, unproject_pixels
from .grids import DepthBinSpec, FeatureGrid


@dataclass(frozen=True)
class FrustumPoints:
    """Ego-frame points with per-point feature rows.

    ``coords`` is ``(n, 3)`` float64; ``features`` is ``(n, channels)`` and
    keeps its floating dtype (benchmarks feed float32 to halve the footprint).
    ``provenance`` records where the feature weights came from.
    """

    coords: np.ndarray
    features: np.ndarray
    provenance: str = "unspecified"

    def __post_init__(self):
        coords = np.ascontiguousarray(np.asarray(self.coords, dtype=np.float64))
        feats = np.asarray(self.features)
        if coords.ndim != 2 or coords.shape[1] != 3:
            raise ValidationError(f"lift: coords must be (n, 3), got {coords.shape}")
        if feats.ndim != 2:
            raise ValidationError(f"lift: features must be (n, channels), got {feats.shape}")
        if feats.shape[0] != coords.shape[0]:
            raise ValidationError(
                f"lift: {coords.shape[0]} coords but {feats.shape[0]} feature rows"
            )
        if not np.issubdtype(feats.dtype, np.floating):
            raise ValidationError(f"lift: features must be floating point, got dtype {feats.dtype}")
        if not np.all(np.isfinite(coords)):
            raise ValidationError("lift: coords contain non-finite values")
        if not np.all(np.isfinite(feats)):
            raise ValidationError("lift: features contain non-finite values")
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "features", np.ascontiguousarray(feats))

    @property
    def count(self) -> int:
        return self.coords.shape[0]

    @property
    def channels(self) -> int:
        return self.features.shape[1]


def lift_view(
    context: FeatureGrid,
    depth: FeatureGrid,
    cam: CameraView,
    bins: DepthBinSpec,
    stride: int,
) -> FrustumPoints:
    """Lift one view's feature map by its depth distribution.

    ``context`` is ``(channels, h, w)`` and ``depth`` is ``(bins, h, w)`` on
    the same grid; ``h * stride`` and ``w * stride`` must match the camera's
    image size.  Returns ``bins.num_bins * h * w`` points in the ego frame.
    """
    if depth.channels != bins.num_bins:
        raise ConfigurationError(
            f"lift: depth grid has {depth.channels} bins, spec expects {bins.num_bins}"
        )
    if (context.height, context.width) != (depth.height, depth.width):
        raise ConfigurationError(
            f"lift: context {context.height}x{context.width} and depth "
            f"{depth.height}x{depth.width} grids differ"
        )
    if stride < 1:
        raise ConfigurationError(f"lift: stride must be at least 1, got {stride}")
    if context.height * stride != cam.image_height or context.width * stride != cam.image_width:
        raise ConfigurationError(
            f"lift: grid {context.height}x{context.width} at stride {stride} does not cover "
            f"the {cam.image_width}x{cam.image_height} image"
        )
    n_bins, h, w = depth.data.shape
    # features[(j, h, w)] = depth[j, h, w] * context[:, h, w]
    outer = depth.data[:, None, :, :] * context.data[None, :, :, :]
    features = outer.transpose(0, 2, 3, 1).reshape(n_bins * h * w, context.channels)
    u_centers = (np.arange(w, dtype=np.float64) + 0.5) * stride
    v_centers = (np.arange(h, dtype=np.float64) + 0.5) * stride
    u = np.broadcast_to(u_centers[None, None, :], (n_bins, h, w)).ravel()
    v = np.broadcast_to(v_centers[None, :, None], (n_bins, h, w)).ravel()
    d = np.broadcast_to(bins.centers()[:, None, None], (n_bins, h, w)).ravel()
    coords = unproject_pixels(u, v, d, cam)
    return FrustumPoints(coords, features, provenance=f"{depth.tag}/view{cam.view_id}")
