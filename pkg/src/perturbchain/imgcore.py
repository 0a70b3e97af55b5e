"""Pixel-level value types and segmentation metrics.

All types are immutable after construction (backing arrays are marked
read-only), so they are safe to share across threads.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "Image",
    "Mask",
    "ProbMap",
    "ThresholdSet",
    "DEFAULT_THRESHOLDS",
    "iou",
    "deterioration",
    "luminance",
]

# Rec. 601 luma weights; they sum to 1 so a constant gray image keeps its value.
_LUMA = np.array([0.299, 0.587, 0.114], dtype=np.float32)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Image:
    """RGB image, shape (height, width, 3), float32 values in [0, 1]."""

    data: np.ndarray

    def __post_init__(self) -> None:
        d = np.asarray(self.data)
        if d.ndim != 3 or d.shape[2] != 3:
            raise ValueError(f"image data must have shape (h, w, 3), got {d.shape}")
        if d.shape[0] < 1 or d.shape[1] < 1:
            raise ValueError("image must contain at least one pixel")
        d = d.astype(np.float32, copy=True)
        if not np.isfinite(d).all():
            raise ValueError("image data contains non-finite values")
        if float(d.min()) < 0.0 or float(d.max()) > 1.0:
            raise ValueError("image values must lie in [0, 1]")
        object.__setattr__(self, "data", _frozen(d))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return 3

    @classmethod
    def from_uint8(cls, arr: np.ndarray) -> "Image":
        """Build from 8-bit RGB; values are divided by 255 on ingestion."""
        a = np.asarray(arr)
        if a.dtype != np.uint8:
            raise ValueError(f"expected uint8 data, got {a.dtype}")
        return cls(a.astype(np.float32) / np.float32(255.0))

    def to_uint8(self) -> np.ndarray:
        return np.clip(np.rint(self.data * 255.0), 0, 255).astype(np.uint8)


@dataclass(frozen=True, eq=False)
class Mask:
    """Binary label mask, shape (height, width), boolean."""

    data: np.ndarray

    def __post_init__(self) -> None:
        d = np.asarray(self.data)
        if d.ndim != 2:
            raise ValueError(f"mask data must have shape (h, w), got {d.shape}")
        if d.shape[0] < 1 or d.shape[1] < 1:
            raise ValueError("mask must contain at least one pixel")
        if d.dtype != np.bool_:
            if not np.isin(d, (0, 1)).all():
                raise ValueError("mask values must be boolean or 0/1")
            d = d.astype(np.bool_)
        object.__setattr__(self, "data", _frozen(d.copy()))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def count(self) -> int:
        return int(np.count_nonzero(self.data))


@dataclass(frozen=True, eq=False)
class ProbMap:
    """Model output probabilities, shape (height, width), float32 in [0, 1]."""

    data: np.ndarray

    def __post_init__(self) -> None:
        d = np.asarray(self.data)
        if d.ndim != 2:
            raise ValueError(f"probability map must have shape (h, w), got {d.shape}")
        if d.shape[0] < 1 or d.shape[1] < 1:
            raise ValueError("probability map must contain at least one pixel")
        d = d.astype(np.float32, copy=True)
        if not np.isfinite(d).all():
            raise ValueError("probability map contains non-finite values")
        if float(d.min()) < 0.0 or float(d.max()) > 1.0:
            raise ValueError("probabilities must lie in [0, 1]")
        object.__setattr__(self, "data", _frozen(d))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class ThresholdSet:
    """Probability thresholds the IoU is averaged over."""

    taus: tuple[float, ...] = (0.5, 0.9, 0.99)

    def __post_init__(self) -> None:
        if len(self.taus) == 0:
            raise ValueError("threshold set must not be empty")
        for t in self.taus:
            if not 0.0 < t < 1.0:
                raise ValueError(f"threshold {t} outside (0, 1)")
        if any(a >= b for a, b in zip(self.taus, self.taus[1:])):
            raise ValueError("thresholds must be strictly increasing")

    def __iter__(self):
        return iter(self.taus)

    def __len__(self) -> int:
        return len(self.taus)


DEFAULT_THRESHOLDS = ThresholdSet()


def iou(pred: ProbMap, mask: Mask, taus: ThresholdSet = DEFAULT_THRESHOLDS) -> float:
    """Multi-threshold intersection-over-union between prediction and mask.

    For each threshold the prediction set is the strict exceedance
    ``pred > tau``; the per-threshold ratio is |pred ∧ mask| / |pred ∨ mask|,
    with an empty union counting as perfect agreement (1). The returned score
    is the mean over all thresholds.
    """
    if (pred.height, pred.width) != (mask.height, mask.width):
        raise ValueError(
            f"dimension mismatch: prediction {pred.width}x{pred.height} "
            f"vs mask {mask.width}x{mask.height}"
        )
    m = mask.data
    total = 0.0
    for tau in taus:
        p = pred.data > tau
        union = int(np.count_nonzero(p | m))
        if union == 0:
            total += 1.0
        else:
            total += int(np.count_nonzero(p & m)) / union
    return total / len(taus)


def deterioration(
    baseline_ious: Sequence[float], perturbed_ious: Sequence[float]
) -> float:
    """Mean drop of the IoU from baseline to perturbed, image by image.

    Negative when the perturbation improves the predictions.
    """
    base = list(baseline_ious)
    pert = list(perturbed_ious)
    if not base or not pert:
        raise ValueError("IoU lists must be non-empty")
    if len(base) != len(pert):
        raise ValueError(f"length mismatch: {len(base)} baseline vs {len(pert)} perturbed")
    return sum(b - p for b, p in zip(base, pert)) / len(base)


def luminance(rgb: np.ndarray) -> np.ndarray:
    """Rec. 601 luma of an (h, w, 3) float32 array, as (h, w) float32."""
    return rgb @ _LUMA
