"""Shared fixtures and random instance helpers"""
from pathlib import Path

import numpy as np
import pytest

from channel_models.channel import Channel, validate_channel
from channel_models.standard_channels import make_standard

SAMPLES = Path(__file__).resolve().parent.parent / "sample_channels"


def random_channel(
    rng: np.random.Generator, a_size: int, b_size: int, sparse: bool = False
) -> Channel:
    """Random channel, with `sparse` a share of the entries is zeroed out first"""
    matrix = rng.dirichlet(np.ones(b_size), size=a_size)
    if sparse:
        mask = rng.random((a_size, b_size)) < 0.4
        mask[np.arange(a_size), rng.integers(0, b_size, size=a_size)] = False
        matrix = np.where(mask, 0.0, matrix)
        matrix = matrix / matrix.sum(axis=1, keepdims=True)
    return validate_channel(matrix)


def random_channels(seed: int, count: int, largest: int = 6, sparse: bool = False) -> list[Channel]:
    """`count` random channels with alphabets of 2..largest symbols"""
    rng = np.random.default_rng(seed)
    return [
        random_channel(
            rng, int(rng.integers(2, largest + 1)), int(rng.integers(2, largest + 1)), sparse
        )
        for _ in range(count)
    ]


@pytest.fixture
def bsc() -> Channel:
    return make_standard("bsc", 0.1)


@pytest.fixture
def useless() -> Channel:
    return make_standard("useless", [0.5, 0.5])


@pytest.fixture
def typewriter5() -> Channel:
    return make_standard("typewriter", 5, 0.5)


@pytest.fixture
def samples() -> Path:
    return SAMPLES
