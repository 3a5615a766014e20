"""Rigid transforms and pinhole projection between ego, camera, and image space.

Frame conventions used throughout the package:

* camera frame: x right, y down, z forward along the optical axis;
* ego frame: x forward, y left, z up.

``CameraView.rotation`` and ``CameraView.translation`` map ego coordinates
into camera coordinates and already encode the axis change, so nothing in
this module converts axes implicitly.  A point ``P`` in the ego frame
projects to pixel coordinates through ``K (R P + t)``; the third component
of that product is the metric depth ``d`` and the first two, divided by
``d``, are the pixel coordinates ``(u, v)``.

Image bounds are half-open: a projection landing exactly on
``u == image_width`` or ``v == image_height`` is discarded.  This keeps the
mapping from pixels to feature-map cells unambiguous.  Points are considered
in front of the camera when their depth exceeds ``DEPTH_EPS``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigurationError, ValidationError

ROTATION_TOL = 1e-9
DEPTH_EPS = 1e-6  # meters


class Point25D(NamedTuple):
    """One image-space sample: pixel coordinates plus metric depth."""

    u: float
    v: float
    d: float


def _frozen_array(value, shape, name: str) -> np.ndarray:
    arr = np.array(value, dtype=np.float64)
    if arr.shape != shape:
        raise ConfigurationError(f"geometry: {name} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ConfigurationError(f"geometry: {name} contains non-finite values")
    arr.flags.writeable = False
    return arr


def _require_rotation(rot: np.ndarray, who: str) -> None:
    dev = float(np.abs(rot.T @ rot - np.eye(3)).max())
    if dev > ROTATION_TOL:
        raise ConfigurationError(
            f"geometry: {who} rotation is not orthonormal (max |R^T R - I| = {dev:.3e})"
        )
    det = float(np.linalg.det(rot))
    if abs(det - 1.0) > ROTATION_TOL:
        raise ConfigurationError(f"geometry: {who} rotation must have determinant 1, got {det!r}")


@dataclass(frozen=True)
class CameraView:
    """One calibrated pinhole view: intrinsics plus the ego-to-camera transform.

    ``intrinsics`` is a 3x3 matrix in pixels whose last row must be
    ``(0, 0, 1)`` with positive focal lengths.  ``rotation`` and
    ``translation`` take ego-frame points into the camera frame.
    """

    intrinsics: np.ndarray
    rotation: np.ndarray
    translation: np.ndarray
    image_width: int
    image_height: int
    view_id: int = 0

    def __post_init__(self):
        who = f"view {self.view_id}"
        k = _frozen_array(self.intrinsics, (3, 3), f"{who} intrinsics")
        r = _frozen_array(self.rotation, (3, 3), f"{who} rotation")
        t = _frozen_array(self.translation, (3,), f"{who} translation")
        _require_rotation(r, who)
        if not (k[2, 0] == 0.0 and k[2, 1] == 0.0 and k[2, 2] == 1.0):
            raise ConfigurationError(f"geometry: {who} intrinsics last row must be (0, 0, 1)")
        if not (k[0, 0] > 0.0 and k[1, 1] > 0.0):
            raise ConfigurationError(f"geometry: {who} focal lengths must be positive")
        if self.image_width <= 0 or self.image_height <= 0:
            raise ConfigurationError(f"geometry: {who} image size must be positive")
        object.__setattr__(self, "intrinsics", k)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)


@dataclass(frozen=True)
class EgoPose:
    """Ego-to-global rigid transform at one timestamp (integer microseconds)."""

    rotation: np.ndarray
    translation: np.ndarray
    timestamp_us: int = 0

    def __post_init__(self):
        r = _frozen_array(self.rotation, (3, 3), "pose rotation")
        t = _frozen_array(self.translation, (3,), "pose translation")
        _require_rotation(r, "pose")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)


@dataclass(frozen=True)
class RigidTransform:
    """A rotation followed by a translation, ``p -> R p + t``."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = _frozen_array(self.rotation, (3, 3), "transform rotation")
        t = _frozen_array(self.translation, (3,), "transform translation")
        _require_rotation(r, "transform")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_pose(cls, pose: EgoPose) -> "RigidTransform":
        """The ego-to-global transform of ``pose``."""
        return cls(pose.rotation, pose.translation)

    def invert(self) -> "RigidTransform":
        return RigidTransform(self.rotation.T, -(self.rotation.T @ self.translation))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform an ``(n, 3)`` array of points."""
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValidationError(f"geometry: expected an (n, 3) point array, got {pts.shape}")
        return pts @ self.rotation.T + self.translation


def project_points(cloud: np.ndarray, cam: CameraView) -> tuple[np.ndarray, np.ndarray]:
    """Project ego-frame points into 2.5D image coordinates for one view.

    Returns ``(uvd, source_index)`` where row ``i`` of ``uvd`` holds
    ``(u, v, d)`` for the retained point ``cloud[source_index[i]]``.  Points
    at or behind the camera plane (``d <= DEPTH_EPS``) or outside the
    half-open image bounds are dropped; input order is preserved.
    """
    pts = np.asarray(cloud, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValidationError(f"geometry: expected an (n, 3) point array, got {pts.shape}")
    if pts.shape[0] == 0:
        raise ValidationError("geometry: project_points requires a nonempty cloud")
    if not np.all(np.isfinite(pts)):
        raise ValidationError("geometry: cloud contains non-finite coordinates")
    r = cam.rotation
    t = cam.translation
    k = cam.intrinsics
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    # Elementwise expansion of K (R p + t), kept free of matmul so results are
    # reproducible bit for bit against per-point scalar evaluation.
    cx = r[0, 0] * x + r[0, 1] * y + r[0, 2] * z + t[0]
    cy = r[1, 0] * x + r[1, 1] * y + r[1, 2] * z + t[1]
    cz = r[2, 0] * x + r[2, 1] * y + r[2, 2] * z + t[2]
    front = np.nonzero(cz > DEPTH_EPS)[0]
    ud = k[0, 0] * cx[front] + k[0, 1] * cy[front] + k[0, 2] * cz[front]
    vd = k[1, 0] * cx[front] + k[1, 1] * cy[front] + k[1, 2] * cz[front]
    d = cz[front]
    u = ud / d
    v = vd / d
    inside = (u >= 0.0) & (u < cam.image_width) & (v >= 0.0) & (v < cam.image_height)
    uvd = np.column_stack([u[inside], v[inside], d[inside]])
    return uvd, front[inside]


def unproject_pixels(u, v, d, cam: CameraView) -> np.ndarray:
    """Inverse of :func:`project_points` for arrays of pixels and depths.

    Accepts scalars or equal-length arrays; returns an ``(n, 3)`` array of
    ego-frame points satisfying ``P = R^T (K^{-1} (u d, v d, d) - t)``.
    """
    u = np.atleast_1d(np.asarray(u, dtype=np.float64))
    v = np.atleast_1d(np.asarray(v, dtype=np.float64))
    d = np.atleast_1d(np.asarray(d, dtype=np.float64))
    if not (u.shape == v.shape == d.shape) or u.ndim != 1:
        raise ValidationError("geometry: u, v, d must be equal-length 1-d arrays")
    if np.any(d <= 0.0):
        bad = int(np.nonzero(d <= 0.0)[0][0])
        raise ValidationError(f"geometry: unprojection requires positive depth, got {d[bad]!r} at index {bad}")
    k_inv = np.linalg.inv(cam.intrinsics)
    pix = np.stack([u * d, v * d, d], axis=0)
    cam_pts = k_inv @ pix - cam.translation[:, None]
    return (cam.rotation.T @ cam_pts).T


def unproject_pixel(u: float, v: float, d: float, cam: CameraView) -> np.ndarray:
    """Unproject a single pixel; returns a 3-vector."""
    return unproject_pixels([u], [v], [d], cam)[0]


def compose_relative(prev: EgoPose, cur: EgoPose) -> RigidTransform:
    """The transform taking points from the ``prev`` ego frame into the ``cur`` one.

    Composition of ``prev``'s ego-to-global map with the inverse of ``cur``'s:
    ``R = R_cur^T R_prev`` and ``t = R_cur^T (t_prev - t_cur)``.
    """
    rot = cur.rotation.T @ prev.rotation
    trans = cur.rotation.T @ (prev.translation - cur.translation)
    return RigidTransform(rot, trans)
