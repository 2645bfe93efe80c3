"""Brute-force reference implementations of the losses and the click encoding.

Everything here is written as literal per-pixel loops over the defining
formulas, independent of the vectorised torch code in ``losses`` and
``encoding``. They exist to be slow and obviously correct; tests compare the
fast paths against them.
"""
from __future__ import annotations

import math

import numpy as np

from .core import ClickSet, label_array, prob_array

_FLOOR = 1e-8
_SMOOTH = 1e-5


def dice_loss_ref(pred, target) -> float:
    p = prob_array(pred)
    t = label_array(target)
    k, h, w = p.shape
    acc = 0.0
    for c in range(k):
        inter = 0.0
        psum = 0.0
        gsum = 0.0
        for i in range(h):
            for j in range(w):
                g = 1.0 if t[i, j] == c else 0.0
                inter += p[c, i, j] * g
                psum += p[c, i, j]
                gsum += g
        acc += (2.0 * inter + _SMOOTH) / (psum + gsum + _SMOOTH)
    return 1.0 - acc / k


def focal_loss_ref(pred, target, gamma: float) -> float:
    p = prob_array(pred)
    t = label_array(target)
    _, h, w = p.shape
    acc = 0.0
    for i in range(h):
        for j in range(w):
            pt = max(float(p[t[i, j], i, j]), _FLOOR)
            acc += (1.0 - pt) ** gamma * (-math.log(pt))
    return acc / (h * w)


def cross_entropy_ref(pred, target) -> float:
    """Mean per-pixel -log p_target; the gamma=0 focal case."""
    return focal_loss_ref(pred, target, gamma=0.0)


def df_loss_ref(pred, target, alpha: float, gamma: float) -> float:
    return (1.0 - alpha) * dice_loss_ref(pred, target) + alpha * focal_loss_ref(
        pred, target, gamma
    )


def ccg_loss_ref(pred, pseudo_gt, clicks: ClickSet, sigma: float) -> float:
    """The literal triple sum: clicks x rows x cols."""
    p = prob_array(pred)
    t = label_array(pseudo_gt)
    _, h, w = p.shape
    acc = 0.0
    for click in clicks:
        for i in range(h):
            for j in range(w):
                if abs(i - click.row) > 3.0 * sigma or abs(j - click.col) > 3.0 * sigma:
                    continue
                if t[i, j] != click.class_label:
                    continue
                g = math.exp(
                    -((i - click.row) ** 2 + (j - click.col) ** 2)
                    / (2.0 * sigma * sigma)
                )
                pt = max(float(p[t[i, j], i, j]), _FLOOR)
                acc += g * (-math.log(pt))
    return acc / (len(clicks) * h * w)


def total_loss_ref(
    pred, pseudo_gt, clicks: ClickSet, alpha, beta, sigma, gamma
) -> float:
    return df_loss_ref(pred, pseudo_gt, alpha, gamma) + beta * ccg_loss_ref(
        pred, pseudo_gt, clicks, sigma
    )


def guidance_ref(
    clicks: ClickSet, height: int, width: int, num_classes: int, sigma: float
) -> np.ndarray:
    """Dense per-pixel sum of truncated Gaussians, then per-channel max-norm."""
    stack = np.zeros((num_classes, height, width), dtype=np.float64)
    for c in range(num_classes):
        for i in range(height):
            for j in range(width):
                acc = 0.0
                for click in clicks:
                    if click.class_label != c:
                        continue
                    if abs(i - click.row) > 3.0 * sigma:
                        continue
                    if abs(j - click.col) > 3.0 * sigma:
                        continue
                    acc += math.exp(
                        -((i - click.row) ** 2 + (j - click.col) ** 2)
                        / (2.0 * sigma * sigma)
                    )
                stack[c, i, j] = acc
        peak = stack[c].max()
        if peak > 0:
            stack[c] /= peak
    return stack
