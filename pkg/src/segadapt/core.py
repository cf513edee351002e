"""Shared domain types and binary-segmentation metrics.

Everything here is a pure function over immutable inputs; the types are
plain dataclasses with their invariants enforced at construction time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

DOMAINS = ("S", "T")

DEFAULT_THRESHOLD = 0.5
BCE_EPS = 1e-7


def _as_probs(pred) -> np.ndarray:
    if isinstance(pred, PredictedMask):
        return pred.probs
    return np.asarray(pred)


def _check_same_shape(a: np.ndarray, b: np.ndarray, what: str) -> None:
    if a.shape != b.shape:
        raise ValueError(f"{what}: shape mismatch {a.shape} vs {b.shape}")


@dataclass(frozen=True)
class Sample:
    """One image with its binary mask and domain tag.

    image: float array (H, W, 3) in [0, 1]
    mask:  binary array (H, W) with values in {0, 1}
    domain: "S" (source) or "T" (target)
    """

    image: np.ndarray
    mask: np.ndarray
    domain: str
    id: str

    def __post_init__(self):
        if self.image.ndim != 3 or self.image.shape[2] != 3:
            raise ValueError(f"image must be (H, W, 3), got {self.image.shape}")
        if self.mask.shape != self.image.shape[:2]:
            raise ValueError(
                f"mask shape {self.mask.shape} does not match image "
                f"spatial dims {self.image.shape[:2]}"
            )
        if self.image.min() < 0.0 or self.image.max() > 1.0:
            raise ValueError("image values must lie in [0, 1]")
        vals = np.unique(self.mask)
        if not np.isin(vals, (0, 1)).all():
            raise ValueError(f"mask must contain only 0 and 1, found {vals[:8]}")
        if self.domain not in DOMAINS:
            raise ValueError(f"domain must be one of {DOMAINS}, got {self.domain!r}")


@dataclass(frozen=True)
class PredictedMask:
    """Per-pixel foreground probabilities in [0, 1], same spatial dims as the input."""

    probs: np.ndarray

    def __post_init__(self):
        p = self.probs
        if p.min() < 0.0 or p.max() > 1.0:
            raise ValueError("probabilities must lie in [0, 1]")


@dataclass(frozen=True)
class Metrics:
    """Dice and pixel accuracy averaged over n_samples images."""

    dice: float
    accuracy: float
    n_samples: int

    def __post_init__(self):
        if not (0.0 <= self.dice <= 1.0 and 0.0 <= self.accuracy <= 1.0):
            raise ValueError(f"scores must lie in [0, 1]: {self}")
        if self.n_samples < 1:
            raise ValueError("n_samples must be positive")


@dataclass(frozen=True)
class RunAggregate:
    """Mean and sample std of dice/accuracy over repeated seeded runs."""

    dice_mean: float
    dice_std: float
    acc_mean: float
    acc_std: float
    n_runs: int

    def __post_init__(self):
        if self.dice_std < 0 or self.acc_std < 0:
            raise ValueError("std fields must be nonnegative")
        if self.n_runs < 1:
            raise ValueError("n_runs must be positive")
        if self.n_runs == 1 and (self.dice_std != 0.0 or self.acc_std != 0.0):
            raise ValueError("std must be 0 for a single run")


def _binarize(pred, threshold: float) -> np.ndarray:
    if not (0.0 < threshold < 1.0):
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    return _as_probs(pred) >= threshold


def dice_coefficient(pred, truth, threshold: float = DEFAULT_THRESHOLD) -> float:
    """Dice overlap 2|P∩Y| / (|P|+|Y|) after thresholding pred.

    Returns 1.0 when both the thresholded prediction and the truth are
    empty (perfect agreement on absence).
    """
    p = _binarize(pred, threshold)
    y = np.asarray(truth).astype(bool)
    _check_same_shape(p, y, "dice_coefficient")
    intersection = np.logical_and(p, y).sum()
    total = p.sum() + y.sum()
    if total == 0:
        return 1.0
    return float(2.0 * intersection / total)


def pixel_accuracy(pred, truth, threshold: float = DEFAULT_THRESHOLD) -> float:
    """Fraction of pixels where the thresholded prediction equals the truth."""
    p = _binarize(pred, threshold)
    y = np.asarray(truth).astype(bool)
    _check_same_shape(p, y, "pixel_accuracy")
    return float((p == y).mean())


def binary_cross_entropy(probs, targets, eps: float = BCE_EPS) -> float:
    """Mean binary cross entropy −[y·log p + (1−y)·log(1−p)] with p clipped to [eps, 1−eps]."""
    p = _as_probs(probs).astype(np.float64)
    y = np.asarray(targets).astype(np.float64)
    _check_same_shape(p, y, "binary_cross_entropy")
    if not (0.0 < eps < 0.5):
        raise ValueError(f"eps must lie in (0, 0.5), got {eps}")
    if np.isnan(p).any() or np.isnan(y).any():
        raise ValueError("binary_cross_entropy: NaN in inputs")
    if p.min() < 0.0 or p.max() > 1.0:
        raise ValueError("probs must lie in [0, 1]")
    p = np.clip(p, eps, 1.0 - eps)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def aggregate_runs(runs: Sequence[Metrics]) -> RunAggregate:
    """Mean and sample standard deviation (ddof=1; 0 for a single run) over runs."""
    if len(runs) == 0:
        raise ValueError("aggregate_runs: empty run list")
    dice = np.array([r.dice for r in runs], dtype=np.float64)
    acc = np.array([r.accuracy for r in runs], dtype=np.float64)
    n = len(runs)
    dice_std = float(dice.std(ddof=1)) if n > 1 else 0.0
    acc_std = float(acc.std(ddof=1)) if n > 1 else 0.0
    return RunAggregate(
        dice_mean=float(dice.mean()),
        dice_std=dice_std,
        acc_mean=float(acc.mean()),
        acc_std=acc_std,
        n_runs=n,
    )


LN2 = math.log(2.0)
