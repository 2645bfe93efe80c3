"""Pretraining and online adaptation around the interactive click loop.

Per image the loop is: localization click, initial prediction, then
correction clicks up to the budget T. With mid-interaction (MI) adaptation
each correction click triggers one parameter update supervised by the
post-click prediction (as pseudo ground-truth) before the refreshed mask is
shown. After the last click, post-interaction (PI) adaptation fine-tunes
twice against the final mask: once with the localization click, once with
artificial correction clicks generated from the stage-1 disagreement.

The true reference mask is used only by the click source and by metric
recording; no update path reads it.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import AdaptationConfig, Click, ClickSet, Image, LabelMask, validate_pair
from .errors import MissingFinalMask, NoActiveTerm
from .losses import LossValue, ccg_loss, df_loss, total_loss
from .metrics import MetricRecord, foreground_dice, union_region_dice
from .model import AdamUpdater, ClickSegmenter, ModelSpec
from .rng import image_rngs, pretrain_rng
from .simulator import (
    SimulatedClicker,
    localization_click,
    pi_artificial_clicks,
    sample_k,
    training_clicks,
)
from .synthetic import Sample


@dataclass
class SessionState:
    """Mutable per-image interaction state."""

    image: Image
    config: AdaptationConfig
    click_history: ClickSet = field(default_factory=ClickSet)
    masks: list[LabelMask] = field(default_factory=list)
    p_final: Optional[LabelMask] = None

    @property
    def t(self) -> int:
        return len(self.click_history)

    @property
    def first_click(self) -> Click:
        return self.click_history.clicks[0]

    def advance(self, click: Click, mask: LabelMask) -> None:
        self.click_history = self.click_history.append(click)
        self.masks.append(mask)


@dataclass
class StreamReport:
    """Everything recorded while processing one image stream."""

    records: list[MetricRecord]
    version_trace: list[tuple[str, int]]
    update_counts: dict[str, int]
    update_timings: list[float]
    scenario: str
    seed: int
    num_classes: int
    click_budget: int
    start_version: int
    end_version: int
    config: dict


def _as_samples(dataset) -> list[Sample]:
    out = []
    for i, item in enumerate(dataset):
        if isinstance(item, Sample):
            out.append(item)
        elif len(item) == 3:
            out.append(Sample(*item))
        else:
            img, mask = item
            out.append(Sample(f"img_{i:04d}", img, mask))
    return out


def _timed_step(updater: AdamUpdater, loss: LossValue, timings) -> None:
    t0 = time.perf_counter()
    updater.step(loss)
    if timings is not None:
        timings.append(time.perf_counter() - t0)


def pretrain(
    dataset,
    spec: ModelSpec,
    cfg: AdaptationConfig,
    epochs: int,
    on_epoch: Optional[Callable[[int, float], None]] = None,
) -> ClickSegmenter:
    """Train a fresh model with simulated clicks; one update per sample pass.

    Each sample gets a localization click, the resulting errors are clicked
    (one random click per ranked component, keeping K ~ U[1, T] of them), and
    one step of unweighted DF + CCG loss is applied. If the localization
    prediction is already perfect, the step trains on the localization click
    alone.
    """
    samples = _as_samples(dataset)
    if not samples:
        raise ValueError("pretraining needs a nonempty dataset")
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    for s in samples:
        validate_pair(s.image, s.mask)
    model = ClickSegmenter(spec, seed=cfg.rng_seed)
    updater = AdamUpdater(model, cfg.lr_pretrain)
    rng = pretrain_rng(cfg.rng_seed)
    for epoch in range(epochs):
        order = rng.permutation(len(samples))
        epoch_losses = []
        for idx in order:
            sample = samples[int(idx)]
            c_loc = localization_click(sample.mask, rng)
            loc_set = ClickSet((c_loc,))
            pred = model.predict_mask(sample.image, loc_set)
            k = sample_k(rng, t_max=cfg.click_budget)
            clicks = training_clicks(pred, sample.mask, k, rng)
            if len(clicks) == 0:
                clicks = loc_set
            probs = model.predict_tracked(sample.image, clicks)
            df = df_loss(probs, sample.mask, cfg.alpha, cfg.focal_gamma)
            ccg = ccg_loss(probs, sample.mask, clicks, cfg.sigma)
            tensor = df + ccg
            loss = LossValue(
                value=float(tensor.detach()),
                terms={"df": float(df.detach()), "ccg": float(ccg.detach())},
                tensor=tensor,
            )
            updater.step(loss)
            epoch_losses.append(loss.value)
        if on_epoch is not None:
            on_epoch(epoch, float(np.mean(epoch_losses)))
    return model


def plain_step(state: SessionState, click: Click, model: ClickSegmenter) -> LabelMask:
    """Append a click and run pure inference (no parameter update)."""
    clicks = state.click_history.append(click)
    mask = model.predict_mask(state.image, clicks)
    state.advance(click, mask)
    return mask


def mi_step(
    state: SessionState,
    new_click: Click,
    model: ClickSegmenter,
    updater: Optional[AdamUpdater],
    require_adaptation: bool = False,
    timings=None,
) -> LabelMask:
    """One mid-interaction round for a new correction click.

    The post-click prediction (with the click added, no gradients) becomes
    the pseudo ground-truth; a gradient pass with the *previous* click set is
    penalised against it (DF and/or CCG restricted to the new click), one
    update is applied, and the refreshed post-click mask is returned.
    With both MI toggles off this is plain inference.
    """
    cfg = state.config
    if state.t < 1:
        raise ValueError("mi_step needs a previous prediction (t >= 1)")
    if not cfg.mi_enabled:
        if require_adaptation:
            raise NoActiveTerm("both MI loss terms are toggled off")
        return plain_step(state, new_click, model)
    assert updater is not None
    prev_clicks = state.click_history
    clicks_t = prev_clicks.append(new_click)
    pseudo_gt = model.predict_mask(state.image, clicks_t)
    probs_prev = model.predict_tracked(state.image, prev_clicks)
    latest_only = ClickSet.of(
        [(new_click.row, new_click.col, new_click.class_label)]
    )
    loss = total_loss(
        probs_prev,
        pseudo_gt,
        latest_only,
        cfg,
        use_df=cfg.dfl_mi,
        use_ccg=cfg.ccgl_mi,
    )
    updater.set_lr(cfg.lr_mi)
    _timed_step(updater, loss, timings)
    mask = model.predict_mask(state.image, clicks_t)
    state.advance(new_click, mask)
    return mask


def pi_adapt(
    state: SessionState,
    model: ClickSegmenter,
    updater: Optional[AdamUpdater],
    rng: np.random.Generator,
    timings=None,
) -> int:
    """Two-stage post-interaction adaptation; returns updates applied.

    Stage 1 fine-tunes on the localization click against the final mask (DF
    loss). Stage 2 generates artificial correction clicks from where the
    stage-1 mask disagrees with the final mask and fine-tunes with DF and/or
    CCG; it is skipped when there is no disagreement.
    """
    cfg = state.config
    if state.p_final is None:
        raise MissingFinalMask("finish the interaction before PI adaptation")
    if not cfg.pi_enabled:
        return 0
    assert updater is not None
    updates = 0
    c1_set = ClickSet((state.first_click,))
    stage2 = cfg.dfl_pi or cfg.ccgl_pi
    if cfg.s1_pi:
        probs1 = model.predict_tracked(state.image, c1_set)
        p1_mask = LabelMask(
            np.argmax(probs1.detach().numpy(), axis=0), model.spec.num_classes
        )
        df = df_loss(probs1, state.p_final, cfg.alpha, cfg.focal_gamma)
        loss = LossValue(
            value=float(df.detach()), terms={"df": float(df.detach())}, tensor=df
        )
        updater.set_lr(cfg.lr_pi)
        _timed_step(updater, loss, timings)
        updates += 1
    elif stage2:
        p1_mask = model.predict_mask(state.image, c1_set)
    else:
        return 0
    if stage2:
        artificial = pi_artificial_clicks(
            p1_mask, state.p_final, cfg.click_budget, rng
        )
        if len(artificial) > 0:
            probs_hat = model.predict_tracked(state.image, artificial)
            loss = total_loss(
                probs_hat,
                state.p_final,
                artificial,
                cfg,
                use_df=cfg.dfl_pi,
                use_ccg=cfg.ccgl_pi,
            )
            updater.set_lr(cfg.lr_pi)
            _timed_step(updater, loss, timings)
            updates += 1
    return updates


def _record(
    records: list[MetricRecord],
    sample: Sample,
    mask: LabelMask,
    t: int,
    scenario: str,
    seed: int,
) -> None:
    k = sample.mask.num_classes
    per_class, mean = foreground_dice(mask, sample.mask, k)
    union = union_region_dice(mask, sample.mask, range(1, k)) if k > 2 else None
    records.append(
        MetricRecord(
            image_id=sample.image_id,
            t=t,
            dice_per_class=per_class,
            dice_mean=mean,
            scenario=scenario,
            seed=seed,
            dice_union=union,
        )
    )


def run_stream(
    dataset,
    model: ClickSegmenter,
    cfg: AdaptationConfig,
    clicker: Optional[SimulatedClicker] = None,
    scenario: str = "standard",
    seed: Optional[int] = None,
) -> StreamReport:
    """Process a sequential image stream with the configured adaptation.

    Dice against the true reference is recorded at every click count; the
    reference itself only reaches the click source and the metric recorder.
    """
    samples = _as_samples(dataset)
    clicker = clicker if clicker is not None else SimulatedClicker()
    seed = cfg.rng_seed if seed is None else seed
    start_version = model.version
    adapting = cfg.mi_enabled or cfg.pi_enabled
    updater = AdamUpdater(model, cfg.lr_mi) if adapting else None
    records: list[MetricRecord] = []
    version_trace: list[tuple[str, int]] = []
    update_counts: dict[str, int] = {}
    update_timings: list[float] = []
    budget = cfg.click_budget
    for idx, sample in enumerate(samples):
        click_rng, adapt_rng = image_rngs(seed, idx)
        clicker.begin_image(click_rng)
        v_before = model.version
        state = SessionState(image=sample.image, config=cfg)
        c1 = clicker.localization(sample.mask, click_rng)
        mask = plain_step(state, c1, model)
        _record(records, sample, mask, 1, scenario, seed)
        frozen = False
        for t in range(2, budget + 1):
            if not frozen:
                click = clicker.correction(
                    state.masks[-1],
                    sample.mask,
                    click_rng,
                    exclude=state.click_history.positions(),
                )
                if click is None:
                    frozen = True
                elif cfg.mi_enabled:
                    mask = mi_step(state, click, model, updater, timings=update_timings)
                else:
                    mask = plain_step(state, click, model)
            _record(records, sample, mask, t, scenario, seed)
        state.p_final = state.masks[-1]
        if cfg.pi_enabled:
            pi_adapt(state, model, updater, adapt_rng, timings=update_timings)
        update_counts[sample.image_id] = model.version - v_before
        version_trace.append((sample.image_id, model.version))
    return StreamReport(
        records=records,
        version_trace=version_trace,
        update_counts=update_counts,
        update_timings=update_timings,
        scenario=scenario,
        seed=seed,
        num_classes=model.spec.num_classes,
        click_budget=budget,
        start_version=start_version,
        end_version=model.version,
        config=cfg.to_dict(),
    )
