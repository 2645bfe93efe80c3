"""Stream scenario runners: ordering, mixing, noise, and click budgets.

All scenarios reduce to `run_stream` over a particular image order, click
source, and budget:

- standard:      seeded shuffle of one domain (the "random order" baseline)
- worst-first:   images pre-scored with the frozen model at one click and
                 streamed hardest (lowest dice) first
- mixed-domains: several domains interleaved under a seeded shuffle
- noisy-clicks:  correction clicks routed through a corruptor
- budget-k:      standard order with an overridden click budget
"""
from __future__ import annotations

from typing import Optional, Sequence

from .core import AdaptationConfig, ClickSet
from .engine import StreamReport, run_stream
from .errors import ConfigError
from .metrics import foreground_dice
from .model import ClickSegmenter
from .rng import order_rng, prescore_rng
from .simulator import (
    CorruptionMode,
    SimulatedClicker,
    corrupt_clicks,
    localization_click,
)
from .synthetic import Sample

SCENARIO_KINDS = ("standard", "worst-first", "mixed-domains", "noisy-clicks", "budget-k")


def shuffled(samples: Sequence[Sample], seed: int) -> list[Sample]:
    rng = order_rng(seed)
    order = rng.permutation(len(samples))
    return [samples[int(i)] for i in order]


def prescore_order(
    samples: Sequence[Sample], model: ClickSegmenter, seed: int
) -> list[Sample]:
    """Sort ascending by frozen-model dice after a single localization click."""
    rng = prescore_rng(seed)
    scored = []
    for i, sample in enumerate(samples):
        click = localization_click(sample.mask, rng)
        mask = model.predict_mask(sample.image, ClickSet((click,)))
        _, mean = foreground_dice(mask, sample.mask, sample.mask.num_classes)
        scored.append((mean, i))
    scored.sort()
    return [samples[i] for _, i in scored]


def scenario_run(
    kind: str,
    samples: Sequence[Sample] | Sequence[Sequence[Sample]],
    model: ClickSegmenter,
    cfg: AdaptationConfig,
    seed: Optional[int] = None,
    noise_mode: Optional[CorruptionMode] = None,
    budget: Optional[int] = None,
    tag: Optional[str] = None,
) -> StreamReport:
    """Run one scenario; the model is adapted in place as the stream flows."""
    if kind not in SCENARIO_KINDS:
        raise ConfigError(f"unknown scenario kind {kind!r}")
    seed = cfg.rng_seed if seed is None else seed
    clicker: SimulatedClicker = SimulatedClicker()
    if kind == "mixed-domains":
        flat = [s for domain in samples for s in domain]
        stream = shuffled(flat, seed)
    else:
        stream = list(samples)  # type: ignore[arg-type]
        if kind == "worst-first":
            stream = prescore_order(stream, model, seed)
        else:
            stream = shuffled(stream, seed)
    if kind == "noisy-clicks":
        if noise_mode is None:
            raise ConfigError("noisy-clicks needs a corruption mode")
        clicker = corrupt_clicks(clicker, noise_mode)
    if kind == "budget-k":
        if budget is None or budget < 1:
            raise ConfigError("budget-k needs a positive click budget")
        cfg = cfg.replace(click_budget=budget)
    return run_stream(
        stream, model, cfg, clicker=clicker, scenario=tag or kind, seed=seed
    )
