"""Camera-aware depth prediction at desk scale, and the explicit depth loss.

Calibration is flattened into a 21-vector (rotation, then translation, then
intrinsics, all row-major), embedded by a two-layer MLP, and squashed through
a sigmoid into one multiplicative gate per feature channel, in the style of
squeeze-and-excitation.  Gating by calibration lets the same weights serve
views with different focal lengths and mounting poses.

Depth itself is a per-pixel softmax over metric depth bins, produced by a
single linear map shared across pixels.  The loss treats every bin as an
independent binary target: probabilities are clamped to
``[PROB_CLAMP, 1 - PROB_CLAMP]``, cross-entropy is averaged over supervised
pixels (those whose target column sums to one) and over bins, and the
gradient with respect to the pre-softmax logits is returned in closed form
so it can be checked against finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ValidationError
from .geometry import CameraView
from .grids import TAG_DEPTH_DISTRIBUTION, FeatureGrid

CAM_VEC_LEN = 21
PROB_CLAMP = 1e-7
DEFAULT_HIDDEN = 32


def camera_param_vector(cam: CameraView) -> np.ndarray:
    """Flatten a view's calibration to the 21-vector consumed by the gate MLP."""
    return np.concatenate([cam.rotation.ravel(), cam.translation, cam.intrinsics.ravel()])


def _param_array(value, shape, name: str) -> np.ndarray:
    arr = np.array(value, dtype=np.float64)
    if arr.shape != shape:
        raise ConfigurationError(f"depth_head: {name} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ConfigurationError(f"depth_head: {name} contains non-finite values")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class DepthHeadParams:
    """Weights of the calibration MLP, the channel gate, and the depth projection.

    Shapes: ``mlp_w1 (hidden, 21)``, ``mlp_b1 (hidden,)``,
    ``mlp_w2 (context_channels, hidden)``, ``mlp_b2 (context_channels,)``,
    ``proj_w (depth_bins, context_channels)``, ``proj_b (depth_bins,)``.
    """

    mlp_w1: np.ndarray
    mlp_b1: np.ndarray
    mlp_w2: np.ndarray
    mlp_b2: np.ndarray
    proj_w: np.ndarray
    proj_b: np.ndarray

    def __post_init__(self):
        w1 = np.array(self.mlp_w1, dtype=np.float64)
        if w1.ndim != 2 or w1.shape[1] != CAM_VEC_LEN:
            raise ConfigurationError(
                f"depth_head: mlp_w1 must have shape (hidden, {CAM_VEC_LEN}), got {w1.shape}"
            )
        hidden = w1.shape[0]
        w2 = np.array(self.mlp_w2, dtype=np.float64)
        if w2.ndim != 2 or w2.shape[1] != hidden:
            raise ConfigurationError(
                f"depth_head: mlp_w2 must have shape (channels, {hidden}), got {w2.shape}"
            )
        channels = w2.shape[0]
        pw = np.array(self.proj_w, dtype=np.float64)
        if pw.ndim != 2 or pw.shape[1] != channels:
            raise ConfigurationError(
                f"depth_head: proj_w must have shape (bins, {channels}), got {pw.shape}"
            )
        bins = pw.shape[0]
        object.__setattr__(self, "mlp_w1", _param_array(w1, (hidden, CAM_VEC_LEN), "mlp_w1"))
        object.__setattr__(self, "mlp_b1", _param_array(self.mlp_b1, (hidden,), "mlp_b1"))
        object.__setattr__(self, "mlp_w2", _param_array(w2, (channels, hidden), "mlp_w2"))
        object.__setattr__(self, "mlp_b2", _param_array(self.mlp_b2, (channels,), "mlp_b2"))
        object.__setattr__(self, "proj_w", _param_array(pw, (bins, channels), "proj_w"))
        object.__setattr__(self, "proj_b", _param_array(self.proj_b, (bins,), "proj_b"))

    @property
    def hidden_units(self) -> int:
        return self.mlp_w1.shape[0]

    @property
    def context_channels(self) -> int:
        return self.mlp_w2.shape[0]

    @property
    def depth_bins(self) -> int:
        return self.proj_w.shape[0]

    @classmethod
    def seeded(
        cls,
        seed: int,
        context_channels: int,
        depth_bins: int,
        hidden: int = DEFAULT_HIDDEN,
    ) -> "DepthHeadParams":
        """Deterministic random initialization, normal with 1/sqrt(fan_in) scale."""
        if context_channels < 1 or depth_bins < 1 or hidden < 1:
            raise ConfigurationError(
                f"depth_head: sizes must be positive, got channels={context_channels} "
                f"bins={depth_bins} hidden={hidden}"
            )
        rng = np.random.default_rng(seed)
        return cls(
            mlp_w1=rng.standard_normal((hidden, CAM_VEC_LEN)) / np.sqrt(CAM_VEC_LEN),
            mlp_b1=rng.standard_normal(hidden) * 0.1,
            # calibration vectors carry pixel-scale intrinsics, so the second
            # layer is scaled well below 1/sqrt(fan_in) to keep gate logits
            # moderate instead of pinning every sigmoid at 0 or 1
            mlp_w2=rng.standard_normal((context_channels, hidden)) / (hidden * CAM_VEC_LEN),
            mlp_b2=rng.standard_normal(context_channels) * 0.1,
            proj_w=rng.standard_normal((depth_bins, context_channels)) / np.sqrt(context_channels),
            proj_b=rng.standard_normal(depth_bins) * 0.1,
        )


def channel_gates(cam_vec: np.ndarray, params: DepthHeadParams) -> np.ndarray:
    """Per-channel multiplicative gates in (0, 1) for one camera."""
    vec = np.asarray(cam_vec, dtype=np.float64)
    if vec.shape != (CAM_VEC_LEN,):
        raise ValidationError(f"depth_head: camera vector must have shape ({CAM_VEC_LEN},), got {vec.shape}")
    if not np.all(np.isfinite(vec)):
        raise ValidationError("depth_head: camera vector contains non-finite values")
    hid = np.maximum(params.mlp_w1 @ vec + params.mlp_b1, 0.0)
    logits = params.mlp_w2 @ hid + params.mlp_b2
    gates = np.empty_like(logits)
    pos = logits >= 0.0
    gates[pos] = 1.0 / (1.0 + np.exp(-logits[pos]))
    e = np.exp(logits[~pos])
    gates[~pos] = e / (1.0 + e)
    # sigmoid saturates in float64 for |logit| beyond ~37; nudge one ulp back
    # inside the open interval the contract promises
    return np.clip(gates, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))


def se_gate(feature: FeatureGrid, cam_vec: np.ndarray, params: DepthHeadParams) -> FeatureGrid:
    """Re-weight every channel of ``feature`` by its calibration-derived gate."""
    if feature.channels != params.context_channels:
        raise ConfigurationError(
            f"depth_head: feature has {feature.channels} channels, parameters expect "
            f"{params.context_channels}"
        )
    gates = channel_gates(cam_vec, params)
    return FeatureGrid(gates[:, None, None] * feature.data, feature.tag)


def depth_logits(feature: FeatureGrid, params: DepthHeadParams) -> np.ndarray:
    """Pre-softmax depth scores, shape ``(depth_bins, height, width)``."""
    if feature.channels != params.context_channels:
        raise ConfigurationError(
            f"depth_head: feature has {feature.channels} channels, parameters expect "
            f"{params.context_channels}"
        )
    return np.einsum("dc,chw->dhw", params.proj_w, feature.data) + params.proj_b[:, None, None]


def softmax_over_bins(logits: np.ndarray) -> FeatureGrid:
    """Per-pixel softmax along the bin axis of a ``(bins, h, w)`` array."""
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim != 3:
        raise ValidationError(f"depth_head: logits must be 3-d (bins, height, width), got {z.shape}")
    z = z - z.max(axis=0, keepdims=True)
    e = np.exp(z)
    return FeatureGrid(e / e.sum(axis=0, keepdims=True), TAG_DEPTH_DISTRIBUTION)


def predict_depth(feature: FeatureGrid, params: DepthHeadParams) -> FeatureGrid:
    """Per-pixel depth distribution from a (gated) image feature."""
    return softmax_over_bins(depth_logits(feature, params))


@dataclass(frozen=True)
class DepthLossResult:
    """Loss value, closed-form logit gradient, and supervision bookkeeping."""

    loss: float
    grad_logits: np.ndarray
    supervised_pixels: int

    @property
    def no_supervision(self) -> bool:
        return self.supervised_pixels == 0


def bce_depth_loss(pred: FeatureGrid, gt: FeatureGrid) -> DepthLossResult:
    """Per-bin binary cross-entropy between a depth distribution and its target.

    Only pixels whose target column sums to exactly one contribute; the loss
    is the mean over those pixels and over bins.  ``grad_logits`` is the
    exact gradient with respect to the pre-softmax logits, zero at
    unsupervised pixels and wherever the probability clamp is active.  With
    no supervised pixel at all the loss is zero with a zero gradient and
    ``no_supervision`` set.
    """
    if pred.data.shape != gt.data.shape:
        raise ConfigurationError(
            f"depth_head: prediction shape {pred.data.shape} does not match target {gt.data.shape}"
        )
    p_raw = pred.data
    y = gt.data
    if np.any(p_raw < 0.0) or np.any(p_raw > 1.0):
        raise ValidationError("depth_head: predicted probabilities must lie in [0, 1]")
    if not np.all((y == 0.0) | (y == 1.0)):
        raise ValidationError("depth_head: targets must be one-hot (entries exactly 0 or 1)")
    colsum = y.sum(axis=0)
    if not np.all((colsum == 0.0) | (colsum == 1.0)):
        raise ValidationError("depth_head: target columns must sum to exactly 0 or 1")
    bins = y.shape[0]
    supervised = colsum == 1.0
    n_sup = int(np.count_nonzero(supervised))
    if n_sup == 0:
        return DepthLossResult(0.0, np.zeros_like(p_raw), 0)
    ps_raw = p_raw[:, supervised]
    ys = y[:, supervised]
    lo, hi = PROB_CLAMP, 1.0 - PROB_CLAMP
    ps = np.clip(ps_raw, lo, hi)
    scale = 1.0 / (n_sup * bins)
    loss = float(np.sum(-(ys * np.log(ps) + (1.0 - ys) * np.log1p(-ps))) * scale)
    # dL/dp, masked where the clamp flattens the loss.
    u = (-(ys / ps) + (1.0 - ys) / (1.0 - ps)) * scale
    u *= (ps_raw > lo) & (ps_raw < hi)
    # Chain through the softmax: g_k = p_k (u_k - sum_c u_c p_c).
    g = ps_raw * (u - np.sum(u * ps_raw, axis=0, keepdims=True))
    grad = np.zeros_like(p_raw)
    grad[:, supervised] = g
    return DepthLossResult(loss, grad, n_sup)
