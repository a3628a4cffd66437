"""Shared fixtures and the acceptance-suite summary hook."""

from __future__ import annotations

import numpy as np
import pytest
import torch

from forgeryqa.config import ModelConfig
from forgeryqa.model import ForgeryVLM, build_vocabulary


@pytest.fixture(autouse=True)
def _seed_everything():
    torch.manual_seed(1234)
    np.random.seed(1234)
    yield


@pytest.fixture
def tiny_config() -> ModelConfig:
    """Small geometry for fast unit tests."""
    return ModelConfig(
        image_size=32,
        patch=8,
        vision_dim=32,
        vision_layers=1,
        vision_heads=2,
        seg_channels=16,
        seg_feature_dim=16,
        mask_size=16,
        lm_dim=32,
        lm_layers=1,
        lm_heads=2,
        context=224,
        prompt_m=4,
        prompt_l=4,
        lora_rank=2,
        lora_alpha=4.0,
        router_hidden=8,
    )


@pytest.fixture
def vocab():
    return build_vocabulary()


@pytest.fixture
def tiny_model(tiny_config, vocab) -> ForgeryVLM:
    torch.manual_seed(7)
    return ForgeryVLM(tiny_config, vocab)


def random_image(rng: np.random.Generator, size: int = 32) -> np.ndarray:
    return rng.uniform(0.0, 1.0, size=(size, size, 3))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion."""
    lines = []
    for status in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(status, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance.py" in nodeid and report.when == "call":
                name = nodeid.split("::")[-1]
                lines.append((name, "PASS" if status == "passed" else "FAIL"))
    if lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for name, verdict in sorted(lines):
            terminalreporter.write_line(f"{verdict}  {name}")
