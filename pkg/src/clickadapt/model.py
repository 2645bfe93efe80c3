"""The trainable click-conditioned segmenter and its single-step updater.

A small U-Net takes the image concatenated with per-class guidance channels
and produces softmax class probabilities. Group normalisation is used instead
of batch statistics because adaptation updates run at batch size 1. Exactly
one optimiser step is applied per update call; the parameter version counter
increments only on a successful step.
"""
from __future__ import annotations

import io
import json
from dataclasses import asdict, dataclass

import numpy as np
import torch
import torch.nn as nn

from .core import ClickSet, Image, LabelMask, ProbMap
from .encoding import assemble_input, encode_clicks
from .errors import CorruptCheckpoint, NonFiniteGradient, ShapeMismatch
from .losses import LossValue

_MAGIC = b"CADP1\n"


@dataclass(frozen=True)
class ModelSpec:
    """Architecture hyperparameters; input width is image channels + K."""

    depth: int = 2
    base_channels: int = 8
    image_channels: int = 1
    num_classes: int = 2
    guidance_sigma: float = 3.0

    def __post_init__(self) -> None:
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        if self.base_channels < 4 or self.base_channels % 4:
            raise ValueError("base_channels must be a positive multiple of 4")
        if self.image_channels < 1 or self.num_classes < 2:
            raise ValueError("need >= 1 image channel and >= 2 classes")
        if self.guidance_sigma <= 0:
            raise ValueError("guidance_sigma must be > 0")

    @property
    def in_channels(self) -> int:
        return self.image_channels + self.num_classes


def _conv_block(cin: int, cout: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(cin, cout, 3, padding=1),
        nn.GroupNorm(4, cout),
        nn.ReLU(inplace=True),
        nn.Conv2d(cout, cout, 3, padding=1),
        nn.GroupNorm(4, cout),
        nn.ReLU(inplace=True),
    )


class _UNet(nn.Module):
    def __init__(self, spec: ModelSpec):
        super().__init__()
        b = spec.base_channels
        widths = [b * 2**i for i in range(spec.depth)]
        self.encoders = nn.ModuleList()
        cin = spec.in_channels
        for w in widths:
            self.encoders.append(_conv_block(cin, w))
            cin = w
        self.pool = nn.MaxPool2d(2)
        self.bottleneck = _conv_block(widths[-1], widths[-1] * 2)
        self.upsamplers = nn.ModuleList()
        self.decoders = nn.ModuleList()
        cin = widths[-1] * 2
        for w in reversed(widths):
            self.upsamplers.append(nn.ConvTranspose2d(cin, w, 2, stride=2))
            self.decoders.append(_conv_block(2 * w, w))
            cin = w
        self.head = nn.Conv2d(widths[0], spec.num_classes, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        skips = []
        for enc in self.encoders:
            x = enc(x)
            skips.append(x)
            x = self.pool(x)
        x = self.bottleneck(x)
        for up, dec, skip in zip(self.upsamplers, self.decoders, reversed(skips)):
            x = dec(torch.cat([up(x), skip], dim=1))
        return self.head(x)


class ClickSegmenter:
    """Click-conditioned model f(image, clicks; params) with versioned params."""

    def __init__(self, spec: ModelSpec, seed: int = 0):
        self.spec = spec
        self.seed = seed
        self.version = 0
        torch.manual_seed(seed)
        self.net = _UNet(spec)
        self.net.eval()

    def _input_tensor(self, image: Image, clicks: ClickSet) -> torch.Tensor:
        if image.channels != self.spec.image_channels:
            raise ShapeMismatch(
                f"model expects {self.spec.image_channels} image channels, "
                f"got {image.channels}"
            )
        div = 2**self.spec.depth
        if image.height % div or image.width % div:
            raise ShapeMismatch(
                f"spatial dims {image.height}x{image.width} must be divisible "
                f"by {div}"
            )
        guidance = encode_clicks(
            clicks,
            image.height,
            image.width,
            self.spec.num_classes,
            self.spec.guidance_sigma,
        )
        x = assemble_input(image, guidance)
        return torch.tensor(x, dtype=torch.float32).unsqueeze(0)

    def predict_tracked(self, image: Image, clicks: ClickSet) -> torch.Tensor:
        """Gradient-carrying forward pass; returns (K, H, W) probabilities."""
        x = self._input_tensor(image, clicks)
        logits = self.net(x)
        return torch.softmax(logits, dim=1).squeeze(0)

    def predict(self, image: Image, clicks: ClickSet) -> ProbMap:
        """Plain inference, no differentiation lineage."""
        with torch.no_grad():
            probs = self.predict_tracked(image, clicks)
        return ProbMap(probs.numpy())

    def predict_mask(self, image: Image, clicks: ClickSet) -> LabelMask:
        return self.predict(image, clicks).argmax_mask()

    def clone(self) -> "ClickSegmenter":
        return ClickSegmenter.restore(self.snapshot())

    def snapshot(self) -> bytes:
        """Self-describing checkpoint: JSON header + named parameter arrays."""
        state = {k: v.detach().numpy() for k, v in self.net.state_dict().items()}
        header = {
            "v": 1,
            "kind": "clickadapt-checkpoint",
            "spec": asdict(self.spec),
            "version": self.version,
            "seed": self.seed,
            "arrays": sorted(state),
        }
        head = json.dumps(header, sort_keys=True).encode()
        body = io.BytesIO()
        np.savez(body, **state)
        return (
            _MAGIC
            + len(head).to_bytes(4, "big")
            + head
            + body.getvalue()
        )

    @classmethod
    def restore(
        cls, blob: bytes, expected_spec: ModelSpec | None = None
    ) -> "ClickSegmenter":
        if not blob.startswith(_MAGIC):
            raise CorruptCheckpoint("bad magic; not a checkpoint blob")
        try:
            off = len(_MAGIC)
            head_len = int.from_bytes(blob[off : off + 4], "big")
            header = json.loads(blob[off + 4 : off + 4 + head_len].decode())
            if header.get("v") != 1 or header.get("kind") != "clickadapt-checkpoint":
                raise CorruptCheckpoint("unsupported checkpoint header")
            spec = ModelSpec(**header["spec"])
            arrays = np.load(io.BytesIO(blob[off + 4 + head_len :]))
            state = {k: torch.from_numpy(arrays[k].copy()) for k in header["arrays"]}
        except CorruptCheckpoint:
            raise
        except Exception as exc:
            raise CorruptCheckpoint(f"truncated or malformed checkpoint: {exc}")
        if expected_spec is not None and spec != expected_spec:
            diffs = [
                f"{k}: {getattr(spec, k)} != {getattr(expected_spec, k)}"
                for k in asdict(spec)
                if getattr(spec, k) != getattr(expected_spec, k)
            ]
            raise CorruptCheckpoint("checkpoint spec mismatch: " + "; ".join(diffs))
        model = cls(spec, seed=header["seed"])
        try:
            model.net.load_state_dict(state)
        except Exception as exc:
            raise CorruptCheckpoint(f"parameter arrays do not fit the spec: {exc}")
        model.version = int(header["version"])
        return model


def save_checkpoint(model: ClickSegmenter, path) -> None:
    with open(path, "wb") as f:
        f.write(model.snapshot())


def load_checkpoint(path, expected_spec: ModelSpec | None = None) -> ClickSegmenter:
    with open(path, "rb") as f:
        return ClickSegmenter.restore(f.read(), expected_spec)


class AdamUpdater:
    """One Adam step per call, guarded against non-finite gradients.

    Moment state persists across calls (and across MI/PI boundaries within a
    stream); construct a fresh updater when starting a new phase.
    """

    def __init__(self, model: ClickSegmenter, lr: float):
        if lr <= 0:
            raise ValueError("lr must be positive")
        self.model = model
        self.opt = torch.optim.Adam(model.net.parameters(), lr=lr)
        self.step_count = 0

    @property
    def lr(self) -> float:
        return self.opt.param_groups[0]["lr"]

    def set_lr(self, lr: float) -> None:
        for group in self.opt.param_groups:
            group["lr"] = lr

    def step(self, loss: LossValue) -> None:
        """Apply exactly one optimiser step to every trainable parameter."""
        if loss.tensor is None:
            raise ValueError("loss carries no autograd lineage")
        self.opt.zero_grad(set_to_none=True)
        loss.tensor.backward()
        for p in self.model.net.parameters():
            if p.grad is not None and not torch.isfinite(p.grad).all():
                self.opt.zero_grad(set_to_none=True)
                raise NonFiniteGradient("aborted step: non-finite gradient")
        self.opt.step()
        self.model.version += 1
        self.step_count += 1
