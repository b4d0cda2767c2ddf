from __future__ import annotations

import numpy as np
import pytest
import torch


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def images(rng):
    return rng.integers(0, 256, size=(8, 32, 32, 3), dtype=np.uint8)


@pytest.fixture
def small_net():
    torch.manual_seed(0)
    from dnajscc.network import CodecNet

    return CodecNet(c=2, v=2)


CRITERIA: dict[str, str] = {}


@pytest.fixture
def criterion():
    """Record a one-line verdict that is echoed in the terminal summary."""

    def record(name: str, passed: bool, detail: str) -> bool:
        CRITERIA[name] = f"{'PASS' if passed else 'FAIL'}  {name}: {detail}"
        print(CRITERIA[name])
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in CRITERIA.values():
            terminalreporter.write_line(line)
