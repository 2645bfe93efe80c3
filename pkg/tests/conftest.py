import time
from types import SimpleNamespace

import numpy as np
import pytest
import torch

torch.set_num_threads(1)

from clickadapt import AdaptationConfig, ClickSegmenter, ModelSpec, generate_domain, pretrain
from clickadapt.synthetic import shift_experiment_specs

_CRITERIA: list[str] = []


def record_criterion(name: str, passed: bool, detail: str) -> None:
    """Collect one acceptance line; printed in the terminal summary."""
    _CRITERIA.append(f"{name} {'PASS' if passed else 'FAIL'}: {detail}")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def desk_setup():
    """The calibrated shift experiment, pretrained once for the whole session."""
    t0 = time.perf_counter()
    src_spec, tgt_spec = shift_experiment_specs()
    source = generate_domain(src_spec)
    target = generate_domain(tgt_spec)
    datagen_s = time.perf_counter() - t0
    cfg = AdaptationConfig(rng_seed=0)
    t0 = time.perf_counter()
    model = pretrain(source, ModelSpec(), cfg, epochs=25)
    pretrain_s = time.perf_counter() - t0
    return SimpleNamespace(
        blob=model.snapshot(),
        source=source,
        target=target,
        cfg=cfg,
        datagen_s=datagen_s,
        pretrain_s=pretrain_s,
    )


@pytest.fixture()
def fresh_model():
    return ClickSegmenter(ModelSpec(), seed=11)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
