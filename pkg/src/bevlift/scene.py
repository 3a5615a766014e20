"""Deterministic synthetic scenes: point clouds, camera rigs, ego trajectories.

Scenes are tiny stand-ins for real drives.  The cloud is expressed in the
current (newest) ego frame, which doubles as the global frame because the
trajectory ends at the identity pose.  Three presets:

* ``wall``: points sampled on a vertical plane facing the front camera at a
  fixed metric depth, the go-to scene for exact-geometry checks;
* ``boxes``: points on the faces of a few axis-aligned boxes;
* ``random``: points uniform over the BEV volume.

All randomness flows from one seeded generator in a fixed draw order, so a
given (seed, preset, sizes) tuple reproduces the same scene byte for byte.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .geometry import CameraView, EgoPose, unproject_pixels

SCENE_PRESETS = ("wall", "boxes", "random")

DEFAULT_IMAGE_WIDTH = 704
DEFAULT_IMAGE_HEIGHT = 256
DEFAULT_FOCAL = 500.0
DEFAULT_MOUNT_HEIGHT = 1.6
DEFAULT_WALL_DEPTH = 20.0
DEFAULT_EGO_STEP = 1.6
DEFAULT_FRAME_DT_US = 500_000


def ring_rig(
    num_views: int = 2,
    width: int = DEFAULT_IMAGE_WIDTH,
    height: int = DEFAULT_IMAGE_HEIGHT,
    focal: float = DEFAULT_FOCAL,
    mount_height: float = DEFAULT_MOUNT_HEIGHT,
) -> list[CameraView]:
    """Cameras spread evenly in yaw, view 0 facing straight ahead.

    Each camera sits at the ego origin raised by ``mount_height``, looking
    outward with zero pitch and roll: for yaw ``a`` the camera axes in ego
    coordinates are right ``(sin a, -cos a, 0)``, down ``(0, 0, -1)``,
    forward ``(cos a, sin a, 0)``.
    """
    if num_views < 1:
        raise ConfigurationError(f"scene: need at least one view, got {num_views}")
    views = []
    center = np.array([0.0, 0.0, mount_height])
    intrinsics = np.array(
        [
            [focal, 0.0, width / 2.0],
            [0.0, focal, height / 2.0],
            [0.0, 0.0, 1.0],
        ]
    )
    for i in range(num_views):
        yaw = 2.0 * math.pi * i / num_views
        c, s = math.cos(yaw), math.sin(yaw)
        rotation = np.array(
            [
                [s, -c, 0.0],
                [0.0, 0.0, -1.0],
                [c, s, 0.0],
            ]
        )
        views.append(
            CameraView(
                intrinsics=intrinsics,
                rotation=rotation,
                translation=-(rotation @ center),
                image_width=width,
                image_height=height,
                view_id=i,
            )
        )
    return views


def straight_trajectory(
    frames: int = 2,
    step: float = DEFAULT_EGO_STEP,
    dt_us: int = DEFAULT_FRAME_DT_US,
) -> list[EgoPose]:
    """Forward motion along global x; the newest pose is the identity.

    Returned oldest to newest: frame ``j`` of ``k`` sits at
    ``x = -(k - 1 - j) * step`` with evenly spaced timestamps.
    """
    if frames < 1:
        raise ConfigurationError(f"scene: need at least one frame, got {frames}")
    poses = []
    for j in range(frames):
        offset = frames - 1 - j
        poses.append(
            EgoPose(
                rotation=np.eye(3),
                translation=np.array([-offset * step, 0.0, 0.0]),
                timestamp_us=-offset * dt_us,
            )
        )
    return poses


@dataclass(frozen=True)
class SyntheticScene:
    """A generated scene: cloud in the current ego frame, rig, trajectory."""

    cloud: np.ndarray
    rig: tuple[CameraView, ...]
    poses: tuple[EgoPose, ...]
    preset: str
    seed: int
    surface: dict

    def __post_init__(self):
        cloud = np.array(self.cloud, dtype=np.float64).reshape(-1, 3)
        cloud.flags.writeable = False
        object.__setattr__(self, "cloud", cloud)
        object.__setattr__(self, "rig", tuple(self.rig))
        object.__setattr__(self, "poses", tuple(self.poses))


def generate_scene(
    seed: int,
    preset: str = "wall",
    num_points: int = 20_000,
    num_views: int = 2,
    frames: int = 2,
    wall_depth: float = DEFAULT_WALL_DEPTH,
    extent: float = 35.0,
) -> SyntheticScene:
    """Build a deterministic scene for the given seed and preset."""
    if preset not in SCENE_PRESETS:
        raise ConfigurationError(f"scene: unknown preset {preset!r}, expected one of {SCENE_PRESETS}")
    if num_points < 0:
        raise ConfigurationError(f"scene: num_points must be nonnegative, got {num_points}")
    rig = ring_rig(num_views)
    poses = straight_trajectory(frames)
    rng = np.random.default_rng(seed)
    front = rig[0]
    if preset == "wall":
        u = rng.uniform(0.0, front.image_width, num_points)
        v = rng.uniform(0.0, front.image_height, num_points)
        d = np.full(num_points, wall_depth)
        cloud = unproject_pixels(u, v, d, front) if num_points else np.zeros((0, 3))
        # Front camera center is on the ego x axis, so constant camera depth
        # means a plane of constant ego x.
        surface = {"kind": "plane_x", "x": wall_depth}
    elif preset == "boxes":
        n_boxes = max(1, min(8, num_points // 64 if num_points else 1))
        centers = np.column_stack(
            [
                rng.uniform(-extent, extent, n_boxes),
                rng.uniform(-extent, extent, n_boxes),
                rng.uniform(-1.0, 1.0, n_boxes),
            ]
        )
        half_sizes = rng.uniform(1.0, 3.0, (n_boxes, 3))
        which = rng.integers(0, n_boxes, num_points)
        face_axis = rng.integers(0, 3, num_points)
        face_sign = rng.integers(0, 2, num_points) * 2 - 1
        unit = rng.uniform(-1.0, 1.0, (num_points, 3))
        unit[np.arange(num_points), face_axis] = face_sign
        cloud = centers[which] + unit * half_sizes[which]
        surface = {
            "kind": "boxes",
            "boxes": [
                {"center": centers[i].tolist(), "half_size": half_sizes[i].tolist()}
                for i in range(n_boxes)
            ],
        }
    else:
        cloud = np.column_stack(
            [
                rng.uniform(-51.2, 51.2, num_points),
                rng.uniform(-51.2, 51.2, num_points),
                rng.uniform(-5.0, 3.0, num_points),
            ]
        )
        surface = {"kind": "volume"}
    return SyntheticScene(
        cloud=cloud,
        rig=tuple(rig),
        poses=tuple(poses),
        preset=preset,
        seed=seed,
        surface=surface,
    )
