"""Simulated user: connected-component error analysis and click generation.

Error components are connected regions (4-connectivity) of the raster where
prediction and reference disagree, ranked by size with ties broken by the
first pixel in row-major order. Training places one random click per ranked
component; inference places one click in the largest component per round.
Everything is deterministic under an explicit numpy Generator.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence

import numpy as np
from scipy import ndimage

from .core import Click, ClickSet, LabelMask, label_array
from .errors import EmptyForeground, NoError, ShapeMismatch

_FOUR_CONN = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=int)


@dataclass(frozen=True)
class ErrorComponent:
    """One connected region of disagreement between prediction and reference."""

    pixels: np.ndarray  # (n, 2) row-major sorted (row, col) pairs
    size: int
    correct_class: int  # majority reference class over the component
    kind: Literal["false_positive", "false_negative"]

    def __post_init__(self) -> None:
        px = np.ascontiguousarray(self.pixels)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)


def error_components(pred, ref) -> list[ErrorComponent]:
    """Disagreement components, largest first."""
    p = label_array(pred)
    r = label_array(ref)
    if p.shape != r.shape:
        raise ShapeMismatch(f"pred {p.shape} vs ref {r.shape}")
    wrong = p != r
    labelled, count = ndimage.label(wrong, structure=_FOUR_CONN)
    comps = []
    for lbl in range(1, count + 1):
        pixels = np.argwhere(labelled == lbl)  # argwhere is row-major sorted
        ref_classes = r[pixels[:, 0], pixels[:, 1]]
        majority = int(np.bincount(ref_classes).argmax())
        comps.append(
            ErrorComponent(
                pixels=pixels,
                size=len(pixels),
                correct_class=majority,
                kind="false_positive" if majority == 0 else "false_negative",
            )
        )
    comps.sort(key=lambda c: (-c.size, int(c.pixels[0, 0]), int(c.pixels[0, 1])))
    return comps


def _pick_pixel(
    pixels: np.ndarray, rng: np.random.Generator, prefer_center: bool = False
) -> tuple[int, int]:
    if prefer_center:
        # Deepest pixel of the component (max distance to its boundary).
        r0, c0 = pixels.min(axis=0)
        r1, c1 = pixels.max(axis=0)
        patch = np.zeros((r1 - r0 + 3, c1 - c0 + 3), dtype=bool)
        patch[pixels[:, 0] - r0 + 1, pixels[:, 1] - c0 + 1] = True
        dist = ndimage.distance_transform_edt(patch)
        idx = np.unravel_index(int(np.argmax(dist)), dist.shape)
        return int(idx[0] + r0 - 1), int(idx[1] + c0 - 1)
    i = int(rng.integers(len(pixels)))
    return int(pixels[i, 0]), int(pixels[i, 1])


def localization_click(gt, rng: np.random.Generator) -> Click:
    """A random click inside the target foreground; starts every interaction."""
    g = label_array(gt)
    present = np.unique(g)
    foreground = present[present > 0]
    if foreground.size == 0:
        raise EmptyForeground("mask has no foreground pixel")
    cls = int(foreground[int(rng.integers(foreground.size))])
    pixels = np.argwhere(g == cls)
    r, c = _pick_pixel(pixels, rng)
    return Click(row=r, col=c, class_label=cls, ordinal=1)


def training_clicks(pred, gt, k: int, rng: np.random.Generator) -> ClickSet:
    """One random click per ranked error component, truncated to k."""
    if k < 1:
        raise ValueError("k must be >= 1")
    g = label_array(gt)
    points = []
    for comp in error_components(pred, gt)[:k]:
        r, c = _pick_pixel(comp.pixels, rng)
        points.append((r, c, int(g[r, c])))
    return ClickSet.of(points)


def sample_k(rng: np.random.Generator, t_max: int = 10) -> int:
    """Uniform click count on [1, t_max]."""
    if t_max < 1:
        raise ValueError("t_max must be >= 1")
    return int(rng.integers(1, t_max + 1))


def correction_click(
    pred,
    ref,
    rng: np.random.Generator,
    exclude: Optional[set[tuple[int, int]]] = None,
    prefer_center: bool = False,
) -> Click:
    """A random click in the largest erroneous component.

    `exclude` removes already-clicked pixels from the candidate pool so a
    click set never repeats a position; if the largest component is fully
    excluded the next one is used.
    """
    r = label_array(ref)
    comps = error_components(pred, ref)
    if not comps:
        raise NoError("prediction matches reference everywhere")
    for comp in comps:
        pixels = comp.pixels
        if exclude:
            keep = [
                i
                for i in range(len(pixels))
                if (int(pixels[i, 0]), int(pixels[i, 1])) not in exclude
            ]
            if not keep:
                continue
            pixels = pixels[keep]
        row, col = _pick_pixel(pixels, rng, prefer_center)
        return Click(row=row, col=col, class_label=int(r[row, col]), ordinal=1)
    raise NoError("every erroneous pixel is already clicked")


def pi_artificial_clicks(
    p1, p_final, t: int, rng: np.random.Generator
) -> ClickSet:
    """Stage-2 clicks: one per component where the stage-1 mask disagrees with
    the final (pseudo ground-truth) mask, capped at t. Empty means skip."""
    if t < 1:
        raise ValueError("t must be >= 1")
    if not error_components(p1, p_final):
        return ClickSet()
    return training_clicks(p1, p_final, t, rng)


@dataclass(frozen=True)
class CorruptionMode:
    """How to inject wrong clicks into a simulated stream.

    kind "fraction": each correction click is wrong with probability `value`.
    kind "first_n": the first `value` correction clicks of every image are wrong.
    kind "image_fraction": a `value` fraction of images get only wrong clicks.
    """

    kind: Literal["fraction", "first_n", "image_fraction"]
    value: float

    def __post_init__(self) -> None:
        if self.kind in ("fraction", "image_fraction"):
            if not 0.0 <= self.value <= 1.0:
                raise ValueError("fraction must lie in [0, 1]")
        elif self.kind == "first_n":
            if self.value < 0 or self.value != int(self.value):
                raise ValueError("first_n needs a non-negative integer")
        else:
            raise ValueError(f"unknown corruption kind {self.kind!r}")


class SimulatedClicker:
    """Oracle click source backed by the true reference mask."""

    def __init__(self, prefer_center: bool = False):
        self.prefer_center = prefer_center

    def begin_image(self, rng: np.random.Generator) -> None:
        """Hook called once per image before any click is requested."""

    def localization(self, gt: LabelMask, rng: np.random.Generator) -> Click:
        return localization_click(gt, rng)

    def correction(
        self,
        pred: LabelMask,
        gt: LabelMask,
        rng: np.random.Generator,
        exclude: Optional[set[tuple[int, int]]] = None,
    ) -> Optional[Click]:
        try:
            return correction_click(
                pred, gt, rng, exclude=exclude, prefer_center=self.prefer_center
            )
        except NoError:
            return None


class CorruptingClicker(SimulatedClicker):
    """Wraps a clicker and relocates selected correction clicks to a
    correctly-predicted pixel with a wrong class label.

    The localization click is never corrupted: before the first forward pass
    there is no prediction to define a "correctly predicted" pixel.
    """

    def __init__(self, base: SimulatedClicker, mode: CorruptionMode):
        super().__init__(prefer_center=base.prefer_center)
        self.base = base
        self.mode = mode
        self._clicks_seen = 0
        self._corrupt_image = False

    def begin_image(self, rng: np.random.Generator) -> None:
        self._clicks_seen = 0
        if self.mode.kind == "image_fraction":
            # Degenerate probabilities skip the draw so a 0-rate corruptor
            # consumes the same rng stream as no corruptor at all.
            if self.mode.value <= 0.0:
                self._corrupt_image = False
            elif self.mode.value >= 1.0:
                self._corrupt_image = True
            else:
                self._corrupt_image = bool(rng.random() < self.mode.value)

    def localization(self, gt: LabelMask, rng: np.random.Generator) -> Click:
        return self.base.localization(gt, rng)

    def _should_corrupt(self, rng: np.random.Generator) -> bool:
        if self.mode.kind == "fraction":
            if self.mode.value <= 0.0:
                return False
            if self.mode.value >= 1.0:
                return True
            return bool(rng.random() < self.mode.value)
        if self.mode.kind == "first_n":
            return self._clicks_seen < int(self.mode.value)
        return self._corrupt_image

    def correction(self, pred, gt, rng, exclude=None):
        corrupt = self._should_corrupt(rng)
        self._clicks_seen += 1
        if not corrupt:
            return self.base.correction(pred, gt, rng, exclude=exclude)
        p = label_array(pred)
        g = label_array(gt)
        candidates = np.argwhere(p == g)
        if exclude:
            keep = [
                i
                for i in range(len(candidates))
                if (int(candidates[i, 0]), int(candidates[i, 1])) not in exclude
            ]
            candidates = candidates[keep] if keep else candidates[:0]
        if len(candidates) == 0:
            # Nothing is predicted correctly; fall back to a genuine click.
            return self.base.correction(pred, gt, rng, exclude=exclude)
        i = int(rng.integers(len(candidates)))
        row, col = int(candidates[i, 0]), int(candidates[i, 1])
        k = int(gt.num_classes) if isinstance(gt, LabelMask) else int(g.max()) + 1
        correct = int(g[row, col])
        if k == 2:
            wrong = 1 - correct
        else:
            others = [c for c in range(k) if c != correct]
            wrong = others[int(rng.integers(len(others)))]
        return Click(row=row, col=col, class_label=wrong, ordinal=1)


def corrupt_clicks(base: SimulatedClicker, mode: CorruptionMode) -> CorruptingClicker:
    """Wrap a click source so a stream's clicks are perturbed per `mode`."""
    return CorruptingClicker(base, mode)
