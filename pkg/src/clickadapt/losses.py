"""Differentiable objectives: Dice, Focal, their blend, and the click-centred
Gaussian (CCG) penalty.

The CCG term walks every click and penalises cross-entropy against the
(pseudo) ground truth near the click, weighted by a Gaussian truncated at
3*sigma and restricted to pixels whose reference class matches the click's
class. Totals are normalised by |C|*H*W.

All functions accept domain objects (ProbMap / LabelMask) or raw tensors and
return 0-dim torch tensors; gradients flow when the prediction carries them.
Brute-force reference implementations live in ``oracles``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import torch

from .core import AdaptationConfig, Click, ClickSet, label_array, prob_array
from .errors import EmptyClickSet, NoActiveTerm, ShapeMismatch

PROB_FLOOR = 1e-8
DICE_SMOOTH = 1e-5


def _prob_tensor(pred) -> torch.Tensor:
    if isinstance(pred, torch.Tensor):
        t = pred
    else:
        t = torch.tensor(prob_array(pred))
    if t.ndim != 3:
        raise ShapeMismatch(f"prediction must be (K, H, W), got {tuple(t.shape)}")
    return t


def _label_tensor(target) -> torch.Tensor:
    if isinstance(target, torch.Tensor):
        t = target.long()
    else:
        t = torch.tensor(label_array(target), dtype=torch.long)
    if t.ndim != 2:
        raise ShapeMismatch(f"target must be (H, W), got {tuple(t.shape)}")
    return t


def _check_shapes(pred: torch.Tensor, target: torch.Tensor) -> None:
    if pred.shape[1:] != target.shape:
        raise ShapeMismatch(
            f"prediction {tuple(pred.shape[1:])} vs target {tuple(target.shape)}"
        )


def _pixel_ce(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Per-pixel -log p_target, probabilities clamped below at PROB_FLOOR."""
    p_true = pred.gather(0, target.unsqueeze(0)).squeeze(0)
    return -torch.log(p_true.clamp(min=PROB_FLOOR))


def dice_loss(pred, target) -> torch.Tensor:
    """Soft Dice loss averaged over all classes, background included."""
    p = _prob_tensor(pred)
    t = _label_tensor(target)
    _check_shapes(p, t)
    k = p.shape[0]
    onehot = torch.nn.functional.one_hot(t, num_classes=k).permute(2, 0, 1).to(p.dtype)
    inter = (p * onehot).sum(dim=(1, 2))
    denom = p.sum(dim=(1, 2)) + onehot.sum(dim=(1, 2))
    per_class = (2.0 * inter + DICE_SMOOTH) / (denom + DICE_SMOOTH)
    return 1.0 - per_class.mean()


def focal_loss(pred, target, gamma: float) -> torch.Tensor:
    """Mean over pixels of (1 - p_true)^gamma * (-log p_true)."""
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    p = _prob_tensor(pred)
    t = _label_tensor(target)
    _check_shapes(p, t)
    p_true = p.gather(0, t.unsqueeze(0)).squeeze(0).clamp(min=PROB_FLOOR)
    return ((1.0 - p_true) ** gamma * (-torch.log(p_true))).mean()


def df_loss(pred, target, alpha: float, gamma: float) -> torch.Tensor:
    """(1 - alpha) * Dice + alpha * Focal."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    return (1.0 - alpha) * dice_loss(pred, target) + alpha * focal_loss(
        pred, target, gamma
    )


def ccg_weight(click: Click, row: int, col: int, sigma: float) -> float:
    """Truncated Gaussian weight of pixel (row, col) around a click."""
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    dr = abs(row - click.row)
    dc = abs(col - click.col)
    if dr > 3.0 * sigma or dc > 3.0 * sigma:
        return 0.0
    return math.exp(-(dr * dr + dc * dc) / (2.0 * sigma * sigma))


def _ccg_weight_map(
    pseudo_gt: torch.Tensor, clicks: ClickSet, sigma: float, dtype: torch.dtype
) -> torch.Tensor:
    """Sum over clicks of the truncated Gaussian masked to the click's class."""
    h, w = pseudo_gt.shape
    radius = int(math.floor(3.0 * sigma))
    weight = torch.zeros((h, w), dtype=dtype)
    for click in clicks:
        r0, r1 = max(0, click.row - radius), min(h, click.row + radius + 1)
        c0, c1 = max(0, click.col - radius), min(w, click.col + radius + 1)
        dr = torch.arange(r0, r1, dtype=dtype) - click.row
        dc = torch.arange(c0, c1, dtype=dtype) - click.col
        bump = torch.exp(
            -(dr[:, None] ** 2 + dc[None, :] ** 2) / (2.0 * sigma * sigma)
        )
        match = (pseudo_gt[r0:r1, c0:c1] == click.class_label).to(dtype)
        weight[r0:r1, c0:c1] += bump * match
    return weight


def ccg_loss(pred, pseudo_gt, clicks: ClickSet, sigma: float) -> torch.Tensor:
    """Click-centred Gaussian loss against a (pseudo) ground-truth mask."""
    if len(clicks) == 0:
        raise EmptyClickSet("ccg_loss requires at least one click")
    p = _prob_tensor(pred)
    t = _label_tensor(pseudo_gt)
    _check_shapes(p, t)
    h, w = t.shape
    clicks.check_bounds(h, w)
    weight = _ccg_weight_map(t, clicks, sigma, p.dtype)
    ce = _pixel_ce(p, t)
    return (weight * ce).sum() / (len(clicks) * h * w)


@dataclass
class LossValue:
    """A scalar objective with its term breakdown and optional autograd handle."""

    value: float
    terms: dict[str, float] = field(default_factory=dict)
    tensor: torch.Tensor | None = None

    def __post_init__(self) -> None:
        if not math.isfinite(self.value):
            raise ValueError("loss value must be finite")


def total_loss(
    pred,
    pseudo_gt,
    clicks: ClickSet,
    cfg: AdaptationConfig,
    use_df: bool,
    use_ccg: bool,
) -> LossValue:
    """Weighted sum of the enabled terms: DF + beta * CCG."""
    if not (use_df or use_ccg):
        raise NoActiveTerm("total_loss needs at least one active term")
    terms: dict[str, float] = {}
    total: torch.Tensor | None = None
    if use_df:
        d = dice_loss(pred, pseudo_gt)
        f = focal_loss(pred, pseudo_gt, cfg.focal_gamma)
        terms["dice"] = float(d.detach())
        terms["focal"] = float(f.detach())
        total = (1.0 - cfg.alpha) * d + cfg.alpha * f
    if use_ccg:
        c = ccg_loss(pred, pseudo_gt, clicks, cfg.sigma)
        terms["ccg"] = float(c.detach())
        weighted = cfg.beta * c
        total = weighted if total is None else total + weighted
    assert total is not None
    return LossValue(value=float(total.detach()), terms=terms, tensor=total)
