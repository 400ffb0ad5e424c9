import itertools
import math
from collections import Counter

import numpy as np
import pytest

from channel_models.errors import DimensionMismatch, DomainError, LimitExceeded
from channel_models.joint_types import (
    JointType,
    count_joint_types,
    enumerate_joint_types,
    exact_multiplicities,
    log_multiplicities,
)
from channel_models.standard_channels import make_standard
from conftest import random_channels


def brute_force_counts(a_size: int, b_size: int, n: int) -> Counter:
    """Joint type of every (x, y) string pair, counted"""
    counts: Counter = Counter()
    for x in itertools.product(range(a_size), repeat=n):
        for y in itertools.product(range(b_size), repeat=n):
            cells = np.zeros((a_size, b_size), dtype=int)
            for a, b in zip(x, y):
                cells[a, b] += 1
            counts[tuple(map(tuple, cells))] += 1
    return counts


@pytest.mark.parametrize("a_size, b_size, n, expected", [(1, 1, 4, 1), (2, 1, 2, 3), (2, 2, 2, 10)])
def test_number_of_types(a_size, b_size, n, expected):
    assert count_joint_types(a_size, b_size, n) == expected
    assert len(enumerate_joint_types(a_size, b_size, n)) == expected


def test_canonical_order():
    table = enumerate_joint_types(2, 1, 2)
    assert table.counts[:, :, 0].tolist() == [[2, 0], [1, 1], [0, 2]]


@pytest.mark.parametrize("a_size, b_size, n", [(2, 2, 3), (2, 3, 2), (3, 2, 2)])
def test_enumeration_matches_brute_force(a_size, b_size, n):
    table = enumerate_joint_types(a_size, b_size, n)
    oracle = brute_force_counts(a_size, b_size, n)
    keys = [tuple(map(tuple, counts.tolist())) for counts in table.counts]
    assert len(set(keys)) == len(keys)
    assert set(keys) == set(oracle)
    for index, key in enumerate(keys):
        assert math.exp(table.log_T[index]) == pytest.approx(oracle[key])
    assert float(np.exp(table.log_T).sum()) == pytest.approx((a_size * b_size) ** n)


def test_section_counts_match_brute_force():
    a_size, b_size, n = 2, 2, 3
    y = (0, 1, 1)
    sections: Counter = Counter()
    for x in itertools.product(range(a_size), repeat=n):
        cells = np.zeros((a_size, b_size), dtype=int)
        for a, b in zip(x, y):
            cells[a, b] += 1
        sections[tuple(map(tuple, cells))] += 1
    for key, count in sections.items():
        jt = JointType(counts=key)
        assert math.exp(log_multiplicities(jt).log_m) == pytest.approx(count)
        assert exact_multiplicities(jt)[1] == count


@pytest.mark.parametrize(
    "counts, size, section",
    [
        (((1, 0), (0, 1)), 2, 1),
        (((3, 0), (0, 0)), 1, 1),
        (((1, 1), (0, 0)), 2, 1),
        (((2, 1), (1, 0)), 12, 3),
    ],
)
def test_multiplicities(counts, size, section):
    jt = JointType(counts=counts)
    logs = log_multiplicities(jt)
    assert math.exp(logs.log_T) == pytest.approx(size)
    assert math.exp(logs.log_m) == pytest.approx(section)
    assert exact_multiplicities(jt) == (size, section)


def test_joint_type_properties():
    jt = JointType(counts=((2, 1), (1, 0)))
    assert jt.n == 4
    assert jt.marginal_a == (3, 1)
    assert jt.marginal_b == (3, 1)
    assert jt.key() == "2,1;1,0"


def test_table_marginals_index_consistently():
    table = enumerate_joint_types(2, 3, 3)
    np.testing.assert_array_equal(table.input_types[table.input_index], table.counts.sum(axis=2))
    np.testing.assert_array_equal(table.output_types[table.output_index], table.counts.sum(axis=1))
    assert len(table.input_types) == 4
    assert len(table.output_types) == 10


@pytest.mark.parametrize("channel", random_channels(21, 4, largest=3, sparse=True))
def test_rows_of_power_stay_stochastic(channel):
    table = enumerate_joint_types(channel.input_size, channel.output_size, 4)
    assert table.stochasticity_residual(channel) <= 1e-10


def test_channel_weights_shape_check():
    table = enumerate_joint_types(2, 2, 2)
    with pytest.raises(DimensionMismatch):
        table.log_channel_weights(make_standard("bec", 0.3))


def test_zero_entries_give_minus_infinity():
    table = enumerate_joint_types(2, 2, 1)
    weights = table.log_channel_weights(make_standard("noiseless", 2))
    assert np.isneginf(weights).sum() == 2


def test_limits():
    with pytest.raises(LimitExceeded):
        enumerate_joint_types(3, 3, 10, limit=1000)
    with pytest.raises(DomainError):
        enumerate_joint_types(2, 2, 0)


@pytest.mark.parametrize(
    "a_size, b_size, n", [(2, 2, n) for n in range(1, 21)] + [(3, 2, 10), (2, 3, 12)]
)
def test_log_multiplicities_match_big_integers(a_size, b_size, n):
    table = enumerate_joint_types(a_size, b_size, n)
    for i in range(len(table)):
        jt = table.joint_type(i)
        size, section = exact_multiplicities(jt)
        logs = log_multiplicities(jt)
        assert math.expm1(logs.log_T - math.log(size)) == pytest.approx(0.0, abs=1e-9)
        assert math.expm1(logs.log_m - math.log(section)) == pytest.approx(0.0, abs=1e-9)
