"""Seed derivation: every stochastic path draws from a named PCG64 substream.

All generators are ``numpy.random.Generator`` over PCG64 seeded through
``SeedSequence([seed, salt, index])``, so runs are reproducible bit-for-bit
across platforms and OS entropy is never consulted. The per-image sequence is
split into a click stream and an adaptation stream so that a live session
(where a human supplies the clicks) consumes the adaptation stream identically
to a simulated run.
"""
from __future__ import annotations

import numpy as np

_PRETRAIN = 1
_IMAGE = 2
_ORDER = 3
_PRESCORE = 4
_DATA = 5


def _gen(ss: np.random.SeedSequence) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(ss))


def make_rng(seed: int, *key: int) -> np.random.Generator:
    return _gen(np.random.SeedSequence([seed, *key]))


def pretrain_rng(seed: int) -> np.random.Generator:
    return make_rng(seed, _PRETRAIN)


def image_rngs(seed: int, index: int) -> tuple[np.random.Generator, np.random.Generator]:
    """(click_rng, adapt_rng) for the index-th image of a stream."""
    click_ss, adapt_ss = np.random.SeedSequence([seed, _IMAGE, index]).spawn(2)
    return _gen(click_ss), _gen(adapt_ss)


def order_rng(seed: int) -> np.random.Generator:
    return make_rng(seed, _ORDER)


def prescore_rng(seed: int) -> np.random.Generator:
    return make_rng(seed, _PRESCORE)


def data_rng(seed: int, index: int) -> np.random.Generator:
    return make_rng(seed, _DATA, index)
