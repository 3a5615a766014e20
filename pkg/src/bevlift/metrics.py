"""Scalar depth-quality metrics over matched prediction/target pairs."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigurationError, ValidationError
from .grids import DepthBinSpec, FeatureGrid

EXTRACT_MODES = ("expectation", "argmax")
NORMALIZATION_TOL = 1e-6


@dataclass(frozen=True)
class DepthEvalPairs:
    """Positive scalar depths, prediction aligned with ground truth."""

    pred: np.ndarray
    gt: np.ndarray

    def __post_init__(self):
        pred = np.asarray(self.pred, dtype=np.float64)
        gt = np.asarray(self.gt, dtype=np.float64)
        if pred.ndim != 1 or gt.ndim != 1 or pred.shape != gt.shape:
            raise ValidationError(
                f"metrics: pred and gt must be equal-length 1-d arrays, got {pred.shape} and {gt.shape}"
            )
        if pred.shape[0] == 0:
            raise ValidationError("metrics: at least one pair is required")
        for name, arr in (("pred", pred), ("gt", gt)):
            bad = ~((arr > 0.0) & np.isfinite(arr))
            if np.any(bad):
                i = int(np.nonzero(bad)[0][0])
                raise ValidationError(f"metrics: {name}[{i}] = {arr[i]!r} is not a positive depth")
        pred.flags.writeable = False
        gt.flags.writeable = False
        object.__setattr__(self, "pred", pred)
        object.__setattr__(self, "gt", gt)

    @property
    def count(self) -> int:
        return self.pred.shape[0]


@dataclass(frozen=True)
class DepthMetrics:
    silog: float
    abs_rel: float
    sq_rel: float
    log10: float
    rmse: float
    count: int


def compute_metrics(pairs: DepthEvalPairs) -> DepthMetrics:
    """Standard depth error statistics over the pairs."""
    pred, gt = pairs.pred, pairs.gt
    e = np.log(pred) - np.log(gt)
    # mean(e^2) - mean(e)^2 evaluated as the mean squared deviation: same
    # variance, but no catastrophic cancellation when e is nearly constant
    dev = e - np.mean(e)
    silog = 100.0 * float(np.sqrt(np.mean(dev**2)))
    diff = pred - gt
    return DepthMetrics(
        silog=silog,
        abs_rel=float(np.mean(np.abs(diff) / gt)),
        sq_rel=float(np.mean(diff**2 / gt)),
        log10=float(np.mean(np.abs(np.log10(pred) - np.log10(gt)))),
        rmse=float(np.sqrt(np.mean(diff**2))),
        count=pairs.count,
    )


def extract_depth_scalar(dist: FeatureGrid, bins: DepthBinSpec, mode: str = "expectation") -> np.ndarray:
    """Collapse a per-pixel depth distribution to an ``(h, w)`` scalar map.

    ``expectation`` takes the probability-weighted mean of bin centers;
    ``argmax`` takes the center of the highest-mass bin, lowest bin on ties.
    Columns must be normalized within NORMALIZATION_TOL.
    """
    if mode not in EXTRACT_MODES:
        raise ConfigurationError(f"metrics: unknown extraction mode {mode!r}, expected one of {EXTRACT_MODES}")
    if dist.channels != bins.num_bins:
        raise ConfigurationError(
            f"metrics: distribution has {dist.channels} bins, spec expects {bins.num_bins}"
        )
    colsum = dist.data.sum(axis=0)
    off = float(np.max(np.abs(colsum - 1.0)))
    if off > NORMALIZATION_TOL:
        raise ValidationError(f"metrics: distribution columns are not normalized (max deviation {off:.3e})")
    centers = bins.centers()
    if mode == "expectation":
        return np.einsum("dhw,d->hw", dist.data, centers)
    return centers[np.argmax(dist.data, axis=0)]


def supervised_depth_pairs(
    pred: FeatureGrid,
    gt: FeatureGrid,
    bins: DepthBinSpec,
    mode: str = "expectation",
) -> Optional[DepthEvalPairs]:
    """Pair predicted scalar depths with one-hot targets at supervised cells.

    Cells whose target column sums to one contribute a pair; the target
    scalar is that bin's center.  Returns None when nothing is supervised.
    """
    if mode not in EXTRACT_MODES:
        raise ConfigurationError(f"metrics: unknown extraction mode {mode!r}, expected one of {EXTRACT_MODES}")
    if pred.data.shape != gt.data.shape:
        raise ConfigurationError(
            f"metrics: prediction shape {pred.data.shape} does not match target {gt.data.shape}"
        )
    if pred.channels != bins.num_bins:
        raise ConfigurationError(
            f"metrics: distribution has {pred.channels} bins, spec expects {bins.num_bins}"
        )
    colsum = gt.data.sum(axis=0)
    if not np.all((colsum == 0.0) | (colsum == 1.0)):
        raise ValidationError("metrics: target columns must sum to exactly 0 or 1")
    supervised = colsum == 1.0
    if not np.any(supervised):
        return None
    centers = bins.centers()
    p = pred.data[:, supervised]
    off = float(np.max(np.abs(p.sum(axis=0) - 1.0)))
    if off > NORMALIZATION_TOL:
        raise ValidationError(
            f"metrics: predicted columns are not normalized at supervised cells (max deviation {off:.3e})"
        )
    if mode == "expectation":
        pred_scalar = centers @ p
    else:
        pred_scalar = centers[np.argmax(p, axis=0)]
    gt_scalar = centers[np.argmax(gt.data[:, supervised], axis=0)]
    return DepthEvalPairs(pred_scalar, gt_scalar)
