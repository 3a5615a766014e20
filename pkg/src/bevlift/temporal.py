"""Ego-motion alignment of frustum points and multi-frame BEV fusion.

Past frames' points live in their own ego frames.  Before pooling they are
carried into the current frame through the relative transform composed from
the two ego poses, so that static structure lands in the same BEV cells in
every frame.  Frames are pooled independently and concatenated along the
channel axis, oldest first, which preserves per-frame provenance and keeps
the fusion itself trivially deterministic.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import ConfigurationError, ValidationError
from .geometry import EgoPose, compose_relative
from .grids import TAG_BEV_FEATURE, FeatureGrid
from .lift import FrustumPoints
from .pooling import BevGridSpec, pool


def align_points(prev: FrustumPoints, prev_pose: EgoPose, cur_pose: EgoPose) -> FrustumPoints:
    """Re-express points from the ``prev_pose`` ego frame in the ``cur_pose`` one.

    Features are carried over untouched; only coordinates move.
    """
    if prev.count == 0:
        raise ValidationError("temporal: cannot align an empty point set")
    rel = compose_relative(prev_pose, cur_pose)
    return FrustumPoints(rel.apply(prev.coords), prev.features, provenance=prev.provenance)


def fuse_frames(
    frames: Sequence[tuple[Sequence[FrustumPoints], EgoPose]],
    spec: BevGridSpec,
    engine: str = "sequential",
    workers: int = 1,
    align: bool = True,
) -> FeatureGrid:
    """Pool ``k`` frames into one ``(k * channels, rows, cols)`` BEV feature.

    ``frames`` is ordered oldest to newest; the last entry is the current
    frame and defines the target ego frame.  Each earlier frame's points are
    aligned through its pose before pooling (unless ``align`` is False, which
    exists to demonstrate the misalignment it would cause).  Channel blocks
    in the output follow frame order.
    """
    frames = list(frames)
    if not frames:
        raise ConfigurationError("temporal: at least one frame is required")
    channels = None
    for j, (points, _) in enumerate(frames):
        for p in points:
            if channels is None:
                channels = p.channels
            elif p.channels != channels:
                raise ConfigurationError(
                    f"temporal: frame {j} has {p.channels}-channel points, expected {channels}"
                )
    cur_pose = frames[-1][1]
    blocks = []
    for j, (points, pose) in enumerate(frames):
        is_current = j == len(frames) - 1
        if align and not is_current:
            points = [align_points(p, pose, cur_pose) for p in points]
        pooled = pool(list(points), spec, engine, workers=workers)
        blocks.append(pooled.grid.data)
    return FeatureGrid(np.concatenate(blocks, axis=0), TAG_BEV_FEATURE)
