"""Shared test utilities: random instances and an independent gradient check."""
import numpy as np
import torch

from clickadapt import AdaptationConfig, ClickSet, total_loss


def random_instance(rng, h_max=8, w_max=8, k_max=3, max_clicks=4, min_clicks=1):
    """Random (probs, pseudo_gt, clicks, k) with distinct click pixels."""
    h = int(rng.integers(4, h_max + 1))
    w = int(rng.integers(4, w_max + 1))
    k = int(rng.integers(2, k_max + 1))
    raw = rng.uniform(0.05, 1.0, size=(k, h, w))
    probs = raw / raw.sum(axis=0, keepdims=True)
    pseudo_gt = rng.integers(0, k, size=(h, w))
    n = int(rng.integers(min_clicks, max_clicks + 1))
    seen = set()
    points = []
    while len(points) < n:
        r, c = int(rng.integers(h)), int(rng.integers(w))
        if (r, c) in seen:
            continue
        seen.add((r, c))
        points.append((r, c, int(rng.integers(k))))
    return probs, pseudo_gt, ClickSet.of(points), k


def total_loss_gradient_error(seed: int, h: int = 6, w: int = 6) -> float:
    """Max relative error between autograd and central differences (step 1e-3)
    of the full DF+CCG objective w.r.t. pre-softmax logits."""
    rng = np.random.default_rng(seed)
    k = int(rng.integers(2, 4))
    logits0 = rng.normal(size=(k, h, w))
    pseudo_gt = rng.integers(0, k, size=(h, w))
    n = int(rng.integers(1, 4))
    seen, points = set(), []
    while len(points) < n:
        r, c = int(rng.integers(h)), int(rng.integers(w))
        if (r, c) not in seen:
            seen.add((r, c))
            points.append((r, c, int(rng.integers(k))))
    clicks = ClickSet.of(points)
    cfg = AdaptationConfig()  # alpha=0.7, beta=200, sigma=3

    def value(logits: torch.Tensor) -> torch.Tensor:
        probs = torch.softmax(logits, dim=0)
        return total_loss(probs, pseudo_gt, clicks, cfg, True, True).tensor

    logits = torch.tensor(logits0, dtype=torch.float64, requires_grad=True)
    value(logits).backward()
    auto = logits.grad.numpy()

    step = 1e-3
    fd = np.zeros_like(logits0)
    with torch.no_grad():
        flat = logits0.reshape(-1)
        for i in range(flat.size):
            plus = flat.copy()
            minus = flat.copy()
            plus[i] += step
            minus[i] -= step
            fp = value(torch.tensor(plus.reshape(k, h, w), dtype=torch.float64))
            fm = value(torch.tensor(minus.reshape(k, h, w), dtype=torch.float64))
            fd.reshape(-1)[i] = (float(fp) - float(fm)) / (2 * step)

    scale = np.maximum(np.maximum(np.abs(auto), np.abs(fd)), 1e-6)
    return float((np.abs(auto - fd) / scale).max())
