import math

import numpy as np
import pytest
import torch

from clickadapt import (
    AdaptationConfig,
    Click,
    ClickSet,
    ccg_loss,
    ccg_weight,
    df_loss,
    dice_loss,
    focal_loss,
    total_loss,
)
from clickadapt.errors import EmptyClickSet, NoActiveTerm, ShapeMismatch
from clickadapt import oracles
from helpers import random_instance, total_loss_gradient_error


def one_hot(target, k):
    return np.eye(k)[target].transpose(2, 0, 1).astype(np.float64)


class TestDice:
    def test_perfect_prediction(self):
        target = np.random.default_rng(0).integers(0, 2, size=(6, 6))
        assert float(dice_loss(one_hot(target, 2), target)) <= 1e-6

    def test_uniform_pred_matches_oracle(self):
        rng = np.random.default_rng(1)
        target = rng.integers(0, 2, size=(5, 5))
        pred = np.full((2, 5, 5), 0.5)
        assert float(dice_loss(pred, target)) == pytest.approx(
            oracles.dice_loss_ref(pred, target), abs=1e-9
        )

    def test_complement_prediction_near_one(self):
        target = np.zeros((6, 6), dtype=int)
        target[:3] = 1
        pred = one_hot(1 - target, 2)
        assert float(dice_loss(pred, target)) > 0.99

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            dice_loss(np.full((2, 4, 4), 0.5), np.zeros((5, 5), dtype=int))


class TestFocal:
    def test_gamma_zero_is_cross_entropy(self):
        rng = np.random.default_rng(2)
        probs, target, _, _ = random_instance(rng)
        assert float(focal_loss(probs, target, gamma=0.0)) == pytest.approx(
            oracles.cross_entropy_ref(probs, target), rel=1e-9
        )

    def test_certain_prediction_is_zero(self):
        target = np.random.default_rng(3).integers(0, 3, size=(5, 5))
        assert float(focal_loss(one_hot(target, 3), target, gamma=2.0)) == 0.0

    def test_single_pixel_half_probability(self):
        pred = np.array([[[0.5]], [[0.5]]])
        target = np.array([[1]])
        expected = 0.25 * math.log(2.0)
        assert float(focal_loss(pred, target, gamma=2.0)) == pytest.approx(
            expected, rel=1e-9
        )


class TestDiceFocal:
    def test_alpha_extremes(self):
        rng = np.random.default_rng(4)
        probs, target, _, _ = random_instance(rng)
        assert float(df_loss(probs, target, alpha=0.0, gamma=2.0)) == pytest.approx(
            float(dice_loss(probs, target)), rel=1e-9
        )
        assert float(df_loss(probs, target, alpha=1.0, gamma=2.0)) == pytest.approx(
            float(focal_loss(probs, target, gamma=2.0)), rel=1e-9
        )

    def test_convex_recombination(self):
        rng = np.random.default_rng(5)
        probs = rng.uniform(0.1, 1.0, size=(2, 6, 6))
        probs /= probs.sum(axis=0, keepdims=True)
        target = rng.integers(0, 2, size=(6, 6))
        expected = 0.3 * oracles.dice_loss_ref(probs, target) + 0.7 * oracles.focal_loss_ref(
            probs, target, 2.0
        )
        assert float(df_loss(probs, target, alpha=0.7, gamma=2.0)) == pytest.approx(
            expected, rel=1e-7
        )


class TestCcgWeight:
    def test_zero_offset(self):
        assert ccg_weight(Click(5, 5, 1), 5, 5, sigma=3.0) == 1.0

    def test_reference_offset(self):
        # offset (3, 4) at sigma 3: exp(-25/18)
        assert ccg_weight(Click(0, 0, 1), 3, 4, sigma=3.0) == pytest.approx(
            math.exp(-25.0 / 18.0), rel=1e-12
        )

    def test_truncation_beyond_box(self):
        assert ccg_weight(Click(0, 0, 1), 10, 0, sigma=3.0) == 0.0

    def test_truncation_boundary_exact(self):
        # |offset| == 3*sigma is inside the box, one more pixel is outside
        inside = ccg_weight(Click(0, 0, 1), 9, 0, sigma=3.0)
        assert inside == pytest.approx(math.exp(-81.0 / 18.0), rel=1e-12)
        assert ccg_weight(Click(0, 0, 1), 10, 0, sigma=3.0) == 0.0
        assert ccg_weight(Click(0, 0, 1), 7, 0, sigma=2.5) > 0.0
        assert ccg_weight(Click(0, 0, 1), 8, 0, sigma=2.5) == 0.0


class TestCcgLoss:
    def test_zero_when_prediction_matches(self):
        rng = np.random.default_rng(6)
        target = rng.integers(0, 2, size=(7, 7))
        clicks = ClickSet.of([(3, 3, int(target[3, 3]))])
        assert float(ccg_loss(one_hot(target, 2), target, clicks, sigma=2.0)) == 0.0

    def test_matches_triple_sum_oracle(self):
        rng = np.random.default_rng(7)
        probs = rng.uniform(0.05, 1.0, size=(2, 5, 5))
        probs /= probs.sum(axis=0, keepdims=True)
        pseudo = rng.integers(0, 2, size=(5, 5))
        clicks = ClickSet.of([(2, 2, 1)])
        assert float(ccg_loss(probs, pseudo, clicks, sigma=1.0)) == pytest.approx(
            oracles.ccg_loss_ref(probs, pseudo, clicks, sigma=1.0), abs=1e-10
        )

    def test_indicator_kills_all_terms(self):
        # click class never appears in the pseudo mask near the click
        pseudo = np.zeros((20, 20), dtype=int)
        pseudo[0, 0] = 1  # far outside the 3-sigma box of the click
        probs = np.full((2, 20, 20), 0.5)
        clicks = ClickSet.of([(15, 15, 1)])
        assert float(ccg_loss(probs, pseudo, clicks, sigma=1.0)) == 0.0

    def test_empty_clickset_rejected(self):
        with pytest.raises(EmptyClickSet):
            ccg_loss(np.full((2, 5, 5), 0.5), np.zeros((5, 5), dtype=int), ClickSet(), 1.0)

    def test_class_limiting_property(self):
        rng = np.random.default_rng(8)
        probs, pseudo, _, k = random_instance(rng, max_clicks=1)
        click_class = int(pseudo[2, 2])
        clicks = ClickSet.of([(2, 2, click_class)])
        base = float(ccg_loss(probs, pseudo, clicks, sigma=1.5))
        perturbed = probs.copy()
        off_class = pseudo != click_class
        perturbed[:, off_class] = rng.uniform(0.05, 1.0, size=(k, int(off_class.sum())))
        assert float(ccg_loss(perturbed, pseudo, clicks, sigma=1.5)) == pytest.approx(
            base, rel=1e-12
        )

    def test_truncation_property(self):
        rng = np.random.default_rng(9)
        h = w = 16
        probs = rng.uniform(0.05, 1.0, size=(2, h, w))
        probs /= probs.sum(axis=0, keepdims=True)
        pseudo = rng.integers(0, 2, size=(h, w))
        clicks = ClickSet.of([(2, 2, 1)])
        sigma = 1.0
        base = float(ccg_loss(probs, pseudo, clicks, sigma))
        perturbed = probs.copy()
        outside = np.ones((h, w), dtype=bool)
        outside[0:6, 0:6] = False  # 3-sigma box around (2, 2)
        perturbed[:, outside] = rng.uniform(0.05, 1.0, size=(2, int(outside.sum())))
        assert float(ccg_loss(perturbed, pseudo, clicks, sigma)) == pytest.approx(
            base, rel=1e-12
        )


class TestTotalLoss:
    def test_single_term_degenerations(self):
        rng = np.random.default_rng(10)
        probs, pseudo, clicks, _ = random_instance(rng)
        cfg = AdaptationConfig()
        only_df = total_loss(probs, pseudo, clicks, cfg, use_df=True, use_ccg=False)
        assert only_df.value == pytest.approx(
            float(df_loss(probs, pseudo, cfg.alpha, cfg.focal_gamma)), rel=1e-9
        )
        only_ccg = total_loss(probs, pseudo, clicks, cfg, use_df=False, use_ccg=True)
        assert only_ccg.value == pytest.approx(
            cfg.beta * float(ccg_loss(probs, pseudo, clicks, cfg.sigma)), rel=1e-9
        )

    def test_recombination_with_beta(self):
        rng = np.random.default_rng(11)
        probs, pseudo, clicks, _ = random_instance(rng)
        cfg = AdaptationConfig()
        combined = total_loss(probs, pseudo, clicks, cfg, use_df=True, use_ccg=True)
        expected = oracles.total_loss_ref(
            probs, pseudo, clicks, cfg.alpha, cfg.beta, cfg.sigma, cfg.focal_gamma
        )
        assert combined.value == pytest.approx(expected, rel=1e-7)
        assert set(combined.terms) == {"dice", "focal", "ccg"}

    def test_no_active_term(self):
        rng = np.random.default_rng(12)
        probs, pseudo, clicks, _ = random_instance(rng)
        with pytest.raises(NoActiveTerm):
            total_loss(probs, pseudo, clicks, AdaptationConfig(), False, False)

    def test_carries_gradient_lineage(self):
        rng = np.random.default_rng(13)
        _, pseudo, clicks, k = random_instance(rng)
        logits = torch.randn(k, pseudo.shape[0], pseudo.shape[1], requires_grad=True)
        probs = torch.softmax(logits, dim=0)
        lv = total_loss(probs, pseudo, clicks, AdaptationConfig(), True, True)
        lv.tensor.backward()
        assert logits.grad is not None and torch.isfinite(logits.grad).all()


def test_gradient_check_small():
    for seed in (21, 22):
        assert total_loss_gradient_error(seed) < 1e-3
