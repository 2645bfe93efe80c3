"""Overlap metrics and interaction-efficiency summaries.

The Dice score is 2TP / (2TP + FP + FN) per class. When both supports are
empty the score is 1.0; when exactly one is empty it is 0.0. Reported means
average the foreground classes only (background overlap is not a useful
clinical signal), so for binary tasks the mean equals the class-1 score.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import label_array
from .errors import ShapeMismatch


@dataclass(frozen=True)
class MetricRecord:
    """Dice of one image at one click count within one scenario run."""

    image_id: str
    t: int
    dice_per_class: dict[int, float]
    dice_mean: float
    scenario: str = "standard"
    seed: int = 0
    dice_union: float | None = None  # union of foreground classes, K > 2 only

    def __post_init__(self) -> None:
        values = list(self.dice_per_class.values()) + [self.dice_mean]
        if self.dice_union is not None:
            values.append(self.dice_union)
        for v in values:
            if not 0.0 <= v <= 1.0:
                raise ValueError("dice must lie in [0, 1]")


def dice(pred, gt, class_id: int) -> float:
    p = label_array(pred) == class_id
    g = label_array(gt) == class_id
    if p.shape != g.shape:
        raise ShapeMismatch(f"pred {p.shape} vs gt {g.shape}")
    tp = int(np.logical_and(p, g).sum())
    psum = int(p.sum())
    gsum = int(g.sum())
    if psum == 0 and gsum == 0:
        return 1.0
    return 2.0 * tp / (psum + gsum)


def union_region_dice(pred, gt, class_ids: Iterable[int]) -> float:
    """Dice of the union of several classes binarised against everything else."""
    ids = sorted(set(class_ids))
    if not ids:
        raise ValueError("class_ids must be nonempty")
    p = np.isin(label_array(pred), ids)
    g = np.isin(label_array(gt), ids)
    if p.shape != g.shape:
        raise ShapeMismatch(f"pred {p.shape} vs gt {g.shape}")
    tp = int(np.logical_and(p, g).sum())
    psum = int(p.sum())
    gsum = int(g.sum())
    if psum == 0 and gsum == 0:
        return 1.0
    return 2.0 * tp / (psum + gsum)


def foreground_dice(pred, gt, num_classes: int) -> tuple[dict[int, float], float]:
    """Per-foreground-class dice plus their mean."""
    per_class = {c: dice(pred, gt, c) for c in range(1, num_classes)}
    mean = float(np.mean(list(per_class.values())))
    return per_class, mean


def clicks_to_target(
    records: Sequence[MetricRecord], target_dice: float, max_clicks: int
) -> tuple[dict[str, int], float]:
    """First click count reaching the target dice per image, capped.

    Returns (per-image counts, mean). Images never reaching the target are
    charged `max_clicks`.
    """
    by_image: dict[str, list[MetricRecord]] = {}
    for rec in records:
        by_image.setdefault(rec.image_id, []).append(rec)
    counts: dict[str, int] = {}
    for image_id, recs in by_image.items():
        counts[image_id] = max_clicks
        for rec in sorted(recs, key=lambda r: r.t):
            if rec.dice_mean >= target_dice:
                counts[image_id] = rec.t
                break
    mean = float(np.mean(list(counts.values()))) if counts else float(max_clicks)
    return counts, mean
