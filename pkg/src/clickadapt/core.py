"""Domain types shared by every other module: rasters, clicks, and run configuration.

All types are immutable value objects; raster payloads are made read-only so
instances can be shared across threads safely.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import ConfigError, LabelOutOfRange, OutOfBounds, ShapeMismatch


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Image:
    """Real-valued input raster, channel-first (C, H, W), values in [0, 1]."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        px = np.asarray(self.pixels, dtype=np.float32)
        if px.ndim != 3:
            raise ShapeMismatch(f"image must be (C, H, W), got shape {px.shape}")
        c, h, w = px.shape
        if c < 1:
            raise ShapeMismatch("image needs at least one channel")
        if h < 8 or w < 8:
            raise ShapeMismatch(f"image must be at least 8x8, got {h}x{w}")
        if not np.isfinite(px).all():
            raise ValueError("image contains non-finite pixels")
        if px.min() < 0.0 or px.max() > 1.0:
            raise ValueError("image pixels must lie in [0, 1]")
        object.__setattr__(self, "pixels", _freeze(px))

    @property
    def channels(self) -> int:
        return self.pixels.shape[0]

    @property
    def height(self) -> int:
        return self.pixels.shape[1]

    @property
    def width(self) -> int:
        return self.pixels.shape[2]


@dataclass(frozen=True)
class LabelMask:
    """Integer class raster (H, W) with values in {0..num_classes-1}."""

    labels: np.ndarray
    num_classes: int

    def __post_init__(self) -> None:
        lab = np.asarray(self.labels)
        if lab.ndim != 2:
            raise ShapeMismatch(f"mask must be (H, W), got shape {lab.shape}")
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if not np.issubdtype(lab.dtype, np.integer):
            lab = lab.astype(np.int64)
        if lab.size and (lab.min() < 0 or lab.max() >= self.num_classes):
            raise LabelOutOfRange(
                f"mask values must lie in [0, {self.num_classes - 1}]"
            )
        object.__setattr__(self, "labels", _freeze(lab.astype(np.int64)))

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]


@dataclass(frozen=True)
class ProbMap:
    """Per-class probability raster (K, H, W); class vectors sum to 1."""

    probs: np.ndarray

    def __post_init__(self) -> None:
        p = np.asarray(self.probs)
        if p.ndim != 3 or p.shape[0] < 2:
            raise ShapeMismatch(f"probs must be (K>=2, H, W), got shape {p.shape}")
        if p.min() < 0.0 or p.max() > 1.0:
            raise ValueError("probabilities must lie in [0, 1]")
        sums = p.sum(axis=0)
        if np.abs(sums - 1.0).max() > 1e-5:
            raise ValueError("per-pixel class probabilities must sum to 1")
        object.__setattr__(self, "probs", _freeze(p))

    @property
    def num_classes(self) -> int:
        return self.probs.shape[0]

    def argmax_mask(self) -> LabelMask:
        return LabelMask(np.argmax(self.probs, axis=0), self.num_classes)


@dataclass(frozen=True)
class Click:
    """A single prompt: pixel coordinate, class label, and insertion index."""

    row: int
    col: int
    class_label: int
    ordinal: int = 1

    def __post_init__(self) -> None:
        if self.row < 0 or self.col < 0:
            raise OutOfBounds(f"click at ({self.row}, {self.col}) is negative")
        if self.class_label < 0:
            raise LabelOutOfRange("click class label must be >= 0")
        if self.ordinal < 1:
            raise ValueError("click ordinal must be >= 1")


@dataclass(frozen=True)
class ClickSet:
    """Ordered set of clicks; positions unique, ordinals contiguous from 1."""

    clicks: tuple[Click, ...] = ()

    def __post_init__(self) -> None:
        clicks = tuple(self.clicks)
        positions = {(c.row, c.col) for c in clicks}
        if len(positions) != len(clicks):
            raise ValueError("two clicks share the same pixel")
        ordinals = sorted(c.ordinal for c in clicks)
        if ordinals != list(range(1, len(clicks) + 1)):
            raise ValueError("click ordinals must be 1..n with no gaps")
        object.__setattr__(self, "clicks", clicks)

    @classmethod
    def of(cls, points: Iterable[tuple[int, int, int]]) -> "ClickSet":
        """Build from (row, col, class_label) triples, ordinals in order given."""
        return cls(
            tuple(
                Click(row=r, col=c, class_label=y, ordinal=i + 1)
                for i, (r, c, y) in enumerate(points)
            )
        )

    def append(self, click: Click) -> "ClickSet":
        """Return a new set with `click` re-stamped as the next ordinal."""
        stamped = dataclasses.replace(click, ordinal=len(self.clicks) + 1)
        return ClickSet(self.clicks + (stamped,))

    def positions(self) -> set[tuple[int, int]]:
        return {(c.row, c.col) for c in self.clicks}

    def check_bounds(self, height: int, width: int) -> None:
        for c in self.clicks:
            if c.row >= height or c.col >= width:
                raise OutOfBounds(
                    f"click ({c.row}, {c.col}) outside {height}x{width} raster"
                )

    def __len__(self) -> int:
        return len(self.clicks)

    def __iter__(self) -> Iterator[Click]:
        return iter(self.clicks)

    def __bool__(self) -> bool:
        return bool(self.clicks)


@dataclass(frozen=True)
class AdaptationConfig:
    """Hyperparameters and toggles for training and online adaptation.

    Defaults follow the reference setting: alpha=0.7, beta=200, sigma=3.
    The five toggles select which loss terms run during mid-interaction (MI)
    and post-interaction (PI) updates; all-off reproduces a frozen model.
    """

    alpha: float = 0.7
    beta: float = 200.0
    sigma: float = 3.0
    guidance_sigma: float = 3.0
    focal_gamma: float = 2.0
    lr_pretrain: float = 1e-3
    lr_mi: float = 1e-4
    lr_pi: float = 1e-4
    click_budget: int = 10
    dfl_mi: bool = True
    ccgl_mi: bool = True
    dfl_pi: bool = True
    ccgl_pi: bool = True
    s1_pi: bool = True
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError("alpha must lie in [0, 1]")
        if self.beta < 0.0:
            raise ConfigError("beta must be >= 0")
        if self.sigma <= 0.0 or self.guidance_sigma <= 0.0:
            raise ConfigError("sigma and guidance_sigma must be > 0")
        if self.focal_gamma < 0.0:
            raise ConfigError("focal_gamma must be >= 0")
        if min(self.lr_pretrain, self.lr_mi, self.lr_pi) <= 0.0:
            raise ConfigError("learning rates must be positive")
        if self.click_budget < 1:
            raise ConfigError("click budget must be >= 1")
        if self.rng_seed < 0:
            raise ConfigError("rng_seed must be a non-negative integer")

    @property
    def mi_enabled(self) -> bool:
        return self.dfl_mi or self.ccgl_mi

    @property
    def pi_enabled(self) -> bool:
        return self.s1_pi or self.dfl_pi or self.ccgl_pi

    def replace(self, **kw) -> "AdaptationConfig":
        return dataclasses.replace(self, **kw)

    def frozen(self) -> "AdaptationConfig":
        """All adaptation toggles off: the no-update baseline."""
        return self.replace(
            dfl_mi=False, ccgl_mi=False, dfl_pi=False, ccgl_pi=False, s1_pi=False
        )

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "AdaptationConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


def label_array(mask: "LabelMask | np.ndarray") -> np.ndarray:
    """Accept either a LabelMask or a bare (H, W) integer array."""
    if isinstance(mask, LabelMask):
        return mask.labels
    return np.asarray(mask)


def prob_array(pred: "ProbMap | np.ndarray") -> np.ndarray:
    if isinstance(pred, ProbMap):
        return pred.probs
    return np.asarray(pred)


def validate_pair(image: Image, mask: LabelMask) -> None:
    """Check that an image and a mask form a consistent training pair."""
    if (image.height, image.width) != (mask.height, mask.width):
        raise ShapeMismatch(
            f"image is {image.height}x{image.width} but mask is "
            f"{mask.height}x{mask.width}"
        )
    # LabelMask construction already guarantees values < num_classes.
