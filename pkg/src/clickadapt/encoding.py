"""Click encoding: per-class Gaussian guidance channels stacked onto the image.

Each class gets one channel. A click drops a unit impulse at its pixel; the
impulse raster is convolved with a Gaussian truncated at 3*sigma (overlapping
impulses sum) and each channel is rescaled so its maximum is exactly 1. The
encoded channels are concatenated after the image channels to form the model
input.
"""
from __future__ import annotations

import math

import numpy as np

from .core import ClickSet, Image
from .errors import OutOfBounds, ShapeMismatch
from dataclasses import dataclass


@dataclass(frozen=True)
class GuidanceStack:
    """Per-class guidance channels (K, H, W) with values in [0, 1]."""

    channels: np.ndarray

    def __post_init__(self) -> None:
        ch = np.asarray(self.channels, dtype=np.float32)
        if ch.ndim != 3:
            raise ShapeMismatch(f"guidance must be (K, H, W), got {ch.shape}")
        ch = np.ascontiguousarray(ch)
        ch.setflags(write=False)
        object.__setattr__(self, "channels", ch)

    @property
    def num_classes(self) -> int:
        return self.channels.shape[0]


def _gaussian_window(
    row: int, col: int, height: int, width: int, sigma: float
) -> tuple[slice, slice, np.ndarray]:
    """Truncated Gaussian bump centred on (row, col), clipped to the raster."""
    radius = int(math.floor(3.0 * sigma))
    r0, r1 = max(0, row - radius), min(height, row + radius + 1)
    c0, c1 = max(0, col - radius), min(width, col + radius + 1)
    dr = np.arange(r0, r1, dtype=np.float64) - row
    dc = np.arange(c0, c1, dtype=np.float64) - col
    bump = np.exp(-(dr[:, None] ** 2 + dc[None, :] ** 2) / (2.0 * sigma * sigma))
    return slice(r0, r1), slice(c0, c1), bump


def encode_clicks(
    clicks: ClickSet,
    height: int,
    width: int,
    num_classes: int,
    guidance_sigma: float,
) -> GuidanceStack:
    """Render a ClickSet into Gaussian-smoothed per-class channels."""
    if guidance_sigma <= 0:
        raise ValueError("guidance_sigma must be > 0")
    clicks.check_bounds(height, width)
    stack = np.zeros((num_classes, height, width), dtype=np.float64)
    for click in clicks:
        if click.class_label >= num_classes:
            raise OutOfBounds(
                f"click class {click.class_label} exceeds {num_classes} classes"
            )
        rs, cs, bump = _gaussian_window(
            click.row, click.col, height, width, guidance_sigma
        )
        stack[click.class_label, rs, cs] += bump
    for c in range(num_classes):
        peak = stack[c].max()
        if peak > 0.0:
            stack[c] /= peak
    return GuidanceStack(stack.astype(np.float32))


def assemble_input(image: Image, guidance: GuidanceStack) -> np.ndarray:
    """Concatenate image channels then guidance channels: ((C+K), H, W)."""
    if image.pixels.shape[1:] != guidance.channels.shape[1:]:
        raise ShapeMismatch(
            f"image {image.pixels.shape[1:]} vs guidance "
            f"{guidance.channels.shape[1:]}"
        )
    return np.concatenate([image.pixels, guidance.channels], axis=0)
