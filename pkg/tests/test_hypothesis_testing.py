import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from channel_models.errors import DimensionMismatch, DomainError
from channel_models.standard_channels import make_standard
from conftest import random_channels
from linear_programs.converse import max_size
from linear_programs.hypothesis_testing import beta, beta_lp, meta_converse, ppv_bound, ppv_inner

pairs = st.integers(2, 6).flatmap(
    lambda size: st.tuples(
        st.lists(st.floats(0.0, 1.0), min_size=size, max_size=size),
        st.lists(st.floats(0.0, 1.0), min_size=size, max_size=size),
    )
)


def normalize(values):
    weights = np.asarray(values) + 1e-3
    return weights / weights.sum()


@pytest.mark.parametrize(
    "p0, p1, eps, expected",
    [
        ([0.3, 0.7], [0.3, 0.7], 0.25, 0.75),
        ([1.0, 0.0], [0.0, 1.0], 0.0, 0.0),
        ([0.9, 0.1], [0.5, 0.5], 0.1, 0.5),
        ([0.9, 0.1], [0.5, 0.5], 1.0, 0.0),
    ],
)
def test_beta_examples(p0, p1, eps, expected):
    assert beta(p0, p1, eps).beta == pytest.approx(expected)


def test_beta_boundary_outcome_is_randomized():
    result = beta([0.9, 0.1], [0.5, 0.5], 0.5)
    np.testing.assert_allclose(result.test.T, [5 / 9, 0.0])
    assert result.beta == pytest.approx(5 / 18)


def test_beta_checks_arguments():
    with pytest.raises(DimensionMismatch):
        beta([0.5, 0.5], [1.0], 0.1)
    with pytest.raises(DomainError):
        beta([0.5, 0.6], [0.5, 0.5], 0.1)
    with pytest.raises(DomainError):
        beta([0.5, 0.5], [0.5, 0.5], 1.5)


@given(pair=pairs, eps=st.floats(0.0, 1.0))
@settings(max_examples=60, deadline=None)
def test_beta_matches_program(pair, eps):
    p0, p1 = normalize(pair[0]), normalize(pair[1])
    assert beta(p0, p1, eps).beta == pytest.approx(beta_lp(p0, p1, eps).beta, abs=1e-9)


@given(pair=pairs, eps=st.floats(0.0, 0.9), step=st.floats(0.0, 0.1))
@settings(max_examples=60, deadline=None)
def test_beta_decreases_with_eps(pair, eps, step):
    p0, p1 = normalize(pair[0]), normalize(pair[1])
    assert beta(p0, p1, eps + step).beta <= beta(p0, p1, eps).beta + 1e-12


@given(pair=pairs, eps=st.floats(0.0, 1.0))
@settings(max_examples=60, deadline=None)
def test_merging_outcomes_never_helps(pair, eps):
    p0, p1 = normalize(pair[0]), normalize(pair[1])
    coarse0 = np.concatenate([[p0[0] + p0[1]], p0[2:]])
    coarse1 = np.concatenate([[p1[0] + p1[1]], p1[2:]])
    assert beta(coarse0, coarse1, eps).beta >= beta(p0, p1, eps).beta - 1e-12


def test_ppv_inner_examples(useless, bsc):
    assert ppv_inner(useless, [0.3, 0.7], 0.5) == pytest.approx(0.5)
    assert ppv_inner(bsc, [0.5, 0.5], 0.1) == pytest.approx(0.5)
    with pytest.raises(DomainError):
        ppv_inner(bsc, [0.5, 0.5], 1.0)
    with pytest.raises(DimensionMismatch):
        ppv_inner(bsc, [1.0], 0.1)


def test_meta_converse_with_uniform_output(bsc):
    assert meta_converse(bsc, [0.5, 0.5], [0.5, 0.5], 0.1) == pytest.approx(2.0)


PPV_CHANNELS = random_channels(41, 100, largest=4, sparse=True)


@pytest.mark.parametrize(
    "channel",
    PPV_CHANNELS[:20]
    + [pytest.param(channel, marks=pytest.mark.slow) for channel in PPV_CHANNELS[20:]],
)
@pytest.mark.parametrize("eps", [0.0, 0.01, 0.1, 0.5])
def test_ppv_bound_equals_size_program(channel, eps):
    bound = ppv_bound(channel, eps)
    size = max_size(channel, eps)
    assert float(bound.M_ppv) == pytest.approx(float(size.M_beta), rel=1e-8)


@pytest.mark.parametrize("channel", random_channels(43, 8, largest=4))
def test_minimax_direction(channel):
    eps = 0.1
    bound = ppv_bound(channel, eps)
    p_star = np.asarray(bound.p, dtype=float)
    p_star = p_star / p_star.sum()
    assert ppv_inner(channel, p_star, eps) == pytest.approx(float(bound.mu), abs=1e-8)
    rng = np.random.default_rng(channel.output_size)
    for _ in range(20):
        p = rng.dirichlet(np.ones(channel.input_size))
        assert ppv_inner(channel, p, eps) >= float(bound.mu) - 1e-9


def test_ppv_bound_examples(useless):
    assert float(ppv_bound(useless, 0.75).M_ppv) == pytest.approx(4.0)
    assert float(ppv_bound(make_standard("noiseless", 3), 0.0).M_ppv) == pytest.approx(3.0)
