import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from channel_models.channel import validate_channel
from channel_models.errors import DimensionMismatch, DomainError, NonConvergence
from channel_models.standard_channels import make_standard
from conftest import random_channel
from linear_programs.asymptotics import (
    AsymptoticOptions,
    capacity,
    dispersion,
    exact_simulation_cost,
    information_density,
    mutual_information,
    normal_approximation,
    q_function,
    q_inv,
    v0_residual,
    zero_dispersion_check,
)
from linear_programs.zero_error import alpha_star_p, zero_error_size


def test_capacity_bsc(bsc):
    result = capacity(bsc)
    assert result.C == pytest.approx(0.5310044064, abs=1e-6)
    np.testing.assert_allclose(result.p_star, [0.5, 0.5], atol=1e-6)
    assert result.residual < 1e-10


@pytest.mark.parametrize(
    "channel, expected",
    [
        (make_standard("noiseless", 3), math.log2(3)),
        (make_standard("useless", [0.3, 0.7]), 0.0),
        (make_standard("bec", 0.3), 0.7),
        (make_standard("typewriter", 5, 0.5), math.log2(2.5)),
    ],
)
def test_capacity_examples(channel, expected):
    assert capacity(channel).C == pytest.approx(expected, abs=1e-6)


def test_capacity_errors(bsc):
    with pytest.raises(DomainError):
        capacity(bsc, tol=0.0)
    with pytest.raises(NonConvergence):
        capacity(make_standard("zchannel", 0.3), options=AsymptoticOptions(max_iterations=2))


def test_dispersion_bsc(bsc):
    result = dispersion(bsc)
    assert result.V == pytest.approx(0.9043582, abs=1e-5)
    assert result.support_set == (0, 1)
    assert v0_residual(bsc, result) > 0.1


@pytest.mark.parametrize(
    "channel",
    [
        make_standard("noiseless", 3),
        make_standard("useless", [0.5, 0.5]),
        make_standard("typewriter", 5, 0.5),
    ],
)
def test_zero_dispersion_examples(channel):
    result = dispersion(channel)
    assert result.V == pytest.approx(0.0, abs=1e-8)
    assert v0_residual(channel, result) < 1e-6


def test_exact_simulation_cost(bsc):
    assert exact_simulation_cost(bsc) == pytest.approx(math.log2(1.8))
    assert exact_simulation_cost(make_standard("noiseless", 4)) == pytest.approx(2.0)


@pytest.mark.parametrize(
    "eps, expected, tol", [(0.5, 0.0, 1e-12), (0.158655, 1.0, 1e-5), (0.02275, 2.0, 1e-4)]
)
def test_q_inv(eps, expected, tol):
    assert q_inv(eps) == pytest.approx(expected, abs=tol)


@given(x=st.floats(-6.0, 6.0))
@settings(max_examples=50, deadline=None)
def test_q_inv_inverts_q(x):
    assert q_inv(q_function(x)) == pytest.approx(x, abs=1e-8)


@pytest.mark.parametrize("eps", [0.0, 1.0, -0.5])
def test_q_inv_domain(eps):
    with pytest.raises(DomainError):
        q_inv(eps)


def test_normal_approximation():
    assert normal_approximation(0.5310044, 0.9043582, 100, 0.05) == pytest.approx(37.459, abs=1e-2)
    assert normal_approximation(1.0, 0.0, 10, 0.01) == pytest.approx(10.0)
    with pytest.raises(DomainError):
        normal_approximation(1.0, -1.0, 10, 0.1)
    with pytest.raises(DomainError):
        normal_approximation(1.0, 1.0, 0, 0.1)


def test_zero_dispersion_flags():
    noiseless = zero_dispersion_check(make_standard("noiseless", 3))
    assert noiseless.cond_capacity_eq_alpha and noiseless.cond_K0_eq_C and noiseless.cond_V_zero
    assert noiseless.consistent

    typewriter = zero_dispersion_check(make_standard("typewriter", 5, 0.5))
    assert typewriter.consistent and typewriter.cond_V_zero

    useless = zero_dispersion_check(make_standard("useless", [0.4, 0.6]))
    assert useless.cond_capacity_eq_alpha and useless.cond_K0_eq_C and useless.cond_V_zero

    for kind, param in (("bsc", 0.1), ("bec", 0.3)):
        flags = zero_dispersion_check(make_standard(kind, param))
        assert not flags.cond_V_zero
        assert not flags.cond_capacity_eq_alpha
        assert not flags.cond_K0_eq_C
        assert flags.consistent


def test_information_density(bsc):
    density = information_density(bsc, [0.5, 0.5])
    assert density[0, 0] == pytest.approx(math.log2(1.8))
    assert density[0, 1] == pytest.approx(math.log2(0.2))
    with pytest.raises(DimensionMismatch):
        information_density(bsc, [1.0])


@given(seed=st.integers(0, 10_000), a_size=st.integers(2, 5), b_size=st.integers(2, 5))
@settings(max_examples=50, deadline=None)
def test_capacity_sandwich(seed, a_size, b_size):
    channel = random_channel(np.random.default_rng(seed), a_size, b_size, sparse=True)
    cap = capacity(channel, tol=1e-9).C
    log_alpha = math.log2(float(zero_error_size(channel).alpha_star))
    assert log_alpha <= cap + 1e-7
    assert cap <= exact_simulation_cost(channel) + 1e-7


@given(seed=st.integers(0, 10_000), a_size=st.integers(2, 5), b_size=st.integers(2, 5))
@settings(max_examples=200, deadline=None)
def test_information_dominates_packing(seed, a_size, b_size):
    rng = np.random.default_rng(seed)
    channel = random_channel(rng, a_size, b_size, sparse=True)
    p = rng.dirichlet(np.ones(a_size))
    information = mutual_information(channel, p)
    assert information >= math.log2(alpha_star_p(channel, p)) - 1e-9
    assert information <= capacity(channel, tol=1e-6).C + 1e-6


def _one_bit_weight():
    """a in (0.6, 0.9) with h(a) = a, so the row (a, b, b, 0) sits at divergence 1 from uniform"""

    def excess(t):
        return -t * math.log2(t) - (1 - t) * math.log2(1 - t) - t

    return brentq(excess, 0.6, 0.9, xtol=1e-15)


@pytest.fixture
def tied_channel():
    """Capacity 1 bit reached only by (1/2, 1/2, 0), the third input still at divergence C"""
    a = _one_bit_weight()
    b = (1 - a) / 2
    return validate_channel([[0.5, 0.5, 0, 0], [0, 0, 0.5, 0.5], [a, b, b, 0]])


@pytest.fixture
def face_channel():
    """Every input at divergence 1 from uniform, with a one dimensional capacity achieving face"""
    a = _one_bit_weight()
    b = (1 - a) / 2
    shifted = [np.roll([a, b, b, 0], k).tolist() for k in range(4)]
    return validate_channel([[0.5, 0.5, 0, 0], [0, 0, 0.5, 0.5], *shifted])


def _variances(channel, result):
    density = information_density(channel, result.capacity.q_star)
    means = result.capacity.divergences
    return np.einsum("xy,xy->x", channel.matrix, (density - means[:, np.newaxis]) ** 2)


def test_capacity_with_unused_optimal_input(tied_channel):
    result = capacity(tied_channel)
    assert result.C == pytest.approx(1.0, abs=1e-9)
    assert result.residual < 1e-10
    np.testing.assert_allclose(result.p_star, [0.5, 0.5, 0.0], atol=1e-6)
    assert result.divergences[2] == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("tol", [None, 1e-7])
def test_dispersion_with_unused_optimal_input(tied_channel, tol):
    result = dispersion(tied_channel, tol=tol)
    assert result.V < 1e-8
    assert 2 in result.support_set
    np.testing.assert_allclose(result.p_min, [0.5, 0.5, 0.0], atol=1e-5)
    assert v0_residual(tied_channel, result) < 1e-6


def test_zero_dispersion_flags_with_unused_optimal_input(tied_channel):
    # the third input keeps K0 above C although V = 0 and C = log2 alpha*
    flags = zero_dispersion_check(tied_channel)
    assert flags.cond_V_zero
    assert flags.cond_capacity_eq_alpha
    assert not flags.cond_K0_eq_C
    assert not flags.consistent
    assert flags.K0 == pytest.approx(math.log2(_one_bit_weight() + 1.5))


def test_dispersion_minimizes_over_the_face(face_channel):
    result = dispersion(face_channel)
    assert result.capacity.C == pytest.approx(1.0, abs=1e-9)
    assert result.support_set == tuple(range(6))
    assert result.V < 1e-8
    variances = _variances(face_channel, result)
    pure = np.array([0.5, 0.5, 0, 0, 0, 0])
    mixed = np.array([0, 0, 0.25, 0.25, 0.25, 0.25])
    for t in np.linspace(0.0, 1.0, 11):
        p = t * pure + (1 - t) * mixed
        np.testing.assert_allclose(p @ face_channel.matrix, np.full(4, 0.25), atol=1e-12)
        assert float(p @ variances) >= result.V - 1e-9


@given(order=st.permutations(range(6)))
@settings(max_examples=20, deadline=None)
def test_dispersion_ignores_input_order(order):
    a = _one_bit_weight()
    b = (1 - a) / 2
    rows = [[0.5, 0.5, 0, 0], [0, 0, 0.5, 0.5]]
    rows += [np.roll([a, b, b, 0], k).tolist() for k in range(4)]
    reference = dispersion(validate_channel(rows)).V
    permuted = dispersion(validate_channel([rows[x] for x in order])).V
    assert permuted == pytest.approx(reference, abs=1e-9)
