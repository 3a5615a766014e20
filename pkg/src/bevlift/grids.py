"""Dense channel-major feature tensors and metric depth discretization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ValidationError

TAG_IMAGE_FEATURE = "image_feature"
TAG_DEPTH_DISTRIBUTION = "depth_distribution"
TAG_DEPTH_ONEHOT = "depth_onehot"
TAG_BEV_FEATURE = "bev_feature"
GRID_TAGS = (TAG_IMAGE_FEATURE, TAG_DEPTH_DISTRIBUTION, TAG_DEPTH_ONEHOT, TAG_BEV_FEATURE)


@dataclass(frozen=True)
class FeatureGrid:
    """A ``(channels, height, width)`` float64 tensor with a semantic tag.

    The data is copied on construction, stored C-contiguous, and marked
    read-only, so instances can be shared freely across threads.
    """

    data: np.ndarray
    tag: str

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64, order="C")
        if arr.ndim != 3:
            raise ValidationError(f"grids: feature data must be 3-d (channels, height, width), got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValidationError(f"grids: feature data for tag {self.tag!r} contains non-finite values")
        if self.tag not in GRID_TAGS:
            raise ConfigurationError(f"grids: unknown tag {self.tag!r}, expected one of {GRID_TAGS}")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @classmethod
    def zeros(cls, channels: int, height: int, width: int, tag: str) -> "FeatureGrid":
        return cls(np.zeros((channels, height, width)), tag)


@dataclass(frozen=True)
class DepthBinSpec:
    """Uniform discretization of metric depth over the half-open range [d_min, d_max)."""

    d_min: float
    d_max: float
    num_bins: int
    mode: str = "uniform"

    def __post_init__(self):
        if self.mode != "uniform":
            raise ConfigurationError(f"grids: unsupported depth bin mode {self.mode!r}")
        if not (self.d_min > 0.0):
            raise ConfigurationError(f"grids: d_min must be positive, got {self.d_min!r}")
        if not (self.d_max > self.d_min):
            raise ConfigurationError(f"grids: d_max must exceed d_min, got [{self.d_min!r}, {self.d_max!r})")
        if self.num_bins < 1:
            raise ConfigurationError(f"grids: num_bins must be at least 1, got {self.num_bins}")

    @property
    def bin_width(self) -> float:
        return (self.d_max - self.d_min) / self.num_bins

    def centers(self) -> np.ndarray:
        """Bin centers, ``d_min + (j + 0.5) * bin_width`` for ``j`` in order."""
        return self.d_min + (np.arange(self.num_bins, dtype=np.float64) + 0.5) * self.bin_width

    def index_of(self, depths) -> np.ndarray:
        """Bin index per depth, or -1 outside [d_min, d_max).

        Accepts scalars or arrays; returns int64 of the broadcast shape.
        """
        d = np.asarray(depths, dtype=np.float64)
        idx = np.floor((d - self.d_min) / self.bin_width).astype(np.int64)
        valid = (d >= self.d_min) & (d < self.d_max) & (idx >= 0) & (idx < self.num_bins)
        return np.where(valid, idx, np.int64(-1))


DEFAULT_BINS = DepthBinSpec(2.0, 58.0, 112)
