import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from bridgebench.errors import PCoinCeilingError, PCoinPrecisionError
from bridgebench.rng import (RngStream, constant_approximator,
                             sample_inverse_gaussian, sample_normal,
                             sample_poisson_times, sample_uniform, toss_p_coin)


def test_uniform_range_and_determinism():
    s = RngStream(1, 0)
    xs = [sample_uniform(s) for _ in range(1000)]
    assert all(0.0 <= x < 1.0 for x in xs)
    s2 = RngStream(1, 0)
    assert xs == [sample_uniform(s2) for _ in range(1000)]


def test_distinct_streams_differ():
    a = [sample_uniform(RngStream(1, 0)) for _ in range(1)]
    b = [sample_uniform(RngStream(1, 1)) for _ in range(1)]
    c = [sample_uniform(RngStream(2, 0)) for _ in range(1)]
    assert a != b and a != c


def test_uniform_mean():
    s = RngStream(42, 0)
    xs = np.array([s.uniform() for _ in range(100_000)])
    assert abs(xs.mean() - 0.5) < 0.005


def test_normal_degenerate_and_errors():
    s = RngStream(3, 0)
    assert sample_normal(s, 1.7, 0.0) == 1.7
    with pytest.raises(ValueError):
        sample_normal(s, 0.0, -1.0)


def test_normal_variance():
    s = RngStream(4, 0)
    xs = np.array([sample_normal(s, 0.0, 1.0) for _ in range(100_000)])
    assert abs(xs.var() - 1.0) < 0.03


def test_normal_affine_closure():
    s = RngStream(5, 0)
    xs = np.array([(sample_normal(s, 5.0, 4.0) - 5.0) / 2.0 for _ in range(10_000)])
    d, _ = stats.kstest(xs, "norm")
    assert d < 0.02


def test_inverse_gaussian_moments():
    s = RngStream(6, 0)
    xs = np.array([sample_inverse_gaussian(s, 1.0, 1.0) for _ in range(100_000)])
    # mean mu, variance mu^3 / lam
    assert abs(xs.mean() - 1.0) < 0.01
    s = RngStream(7, 0)
    xs = np.array([sample_inverse_gaussian(s, 2.0, 3.0) for _ in range(100_000)])
    se_mean = math.sqrt(8.0 / 3.0 / len(xs))
    assert abs(xs.mean() - 2.0) < 3 * se_mean
    var = 8.0 / 3.0
    # variance estimator SE ~ sqrt((m4 - var^2)/n); generous factor instead
    assert abs(xs.var() - var) < 0.1


def test_inverse_gaussian_concentration():
    s = RngStream(8, 0)
    xs = [sample_inverse_gaussian(s, 1.0, 1e6) for _ in range(1000)]
    assert all(abs(x - 1.0) < 0.01 for x in xs)


def test_inverse_gaussian_parameter_validation():
    s = RngStream(9, 0)
    with pytest.raises(ValueError):
        sample_inverse_gaussian(s, -1.0, 1.0)
    with pytest.raises(ValueError):
        sample_inverse_gaussian(s, 1.0, 0.0)


def test_inverse_gaussian_ks_against_quadrature_cdf():
    mu, lam = 1.3, 0.8
    s = RngStream(10, 0)
    xs = np.sort([sample_inverse_gaussian(s, mu, lam) for _ in range(10_000)])

    def pdf(v):
        return math.sqrt(lam / (2 * math.pi * v ** 3)) * math.exp(
            -lam * (v - mu) ** 2 / (2 * mu * mu * v))

    grid = np.linspace(1e-9, xs[-1] * 1.05, 20_001)
    vals = np.array([pdf(v) for v in grid])
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (vals[1:] + vals[:-1]) * np.diff(grid))])
    cdf /= cdf[-1]
    emp = np.arange(1, len(xs) + 1) / len(xs)
    interp = np.interp(xs, grid, cdf)
    d = np.max(np.abs(emp - interp))
    assert d < 0.02


def test_poisson_times_null_and_ordering():
    s = RngStream(11, 0)
    assert sample_poisson_times(s, 0.0, 0.0, 10.0) == []
    with pytest.raises(ValueError):
        sample_poisson_times(s, 1.0, 1.0, 1.0)
    for _ in range(200):
        ts = sample_poisson_times(s, 3.0, 2.0, 5.0)
        assert all(2.0 < t < 5.0 for t in ts)
        assert all(b > a for a, b in zip(ts, ts[1:]))


def test_poisson_times_mean_count():
    s = RngStream(12, 0)
    counts = [len(sample_poisson_times(s, 2.0, 0.0, 10.0)) for _ in range(10_000)]
    assert abs(np.mean(counts) - 20.0) < 0.14


class _InjectedStream:
    """Stream stub feeding a fixed uniform sequence (tests only)."""

    def __init__(self, us):
        self._us = list(us)

    def uniform(self):
        return self._us.pop(0)


def test_p_coin_deterministic_given_u():
    # p_hat = 0.5, eps = 2^{-n-1}: u = 0.3 decides 1 once 0.3 < 0.5 - 2^{-n-1}
    out = toss_p_coin(None, constant_approximator(0.5), u=0.3)
    assert out == 1
    out = toss_p_coin(None, constant_approximator(0.5), u=0.9)
    assert out == 0


def test_p_coin_zero_probability():
    for u in (0.0, 0.2, 0.5, 0.999):
        assert toss_p_coin(None, constant_approximator(0.0), u=u) == 0


def test_p_coin_frequency():
    s = RngStream(13, 0)
    n = 100_000
    heads = sum(toss_p_coin(s, constant_approximator(0.37)) for _ in range(n))
    se = math.sqrt(0.37 * 0.63 / n)
    assert abs(heads / n - 0.37) < 3 * se


@settings(max_examples=300, deadline=None)
@given(p=st.floats(0.0, 1.0), u=st.floats(0.0, 1.0, exclude_max=True))
def test_p_coin_exact_decision_rule(p, u):
    # unbiasedness: returned bit equals 1{u < p} for any injected u != p
    if u == p:
        return
    assert toss_p_coin(None, constant_approximator(p), u=u) == (1 if u < p else 0)


def test_p_coin_consumes_one_uniform():
    s = _InjectedStream([0.25])
    assert toss_p_coin(s, constant_approximator(0.8)) == 1
    assert s._us == []


def test_p_coin_precision_diagnostic():
    def stuck():
        while True:
            yield 0.5, 1e-18
    with pytest.raises(PCoinPrecisionError):
        toss_p_coin(None, stuck(), u=0.5)


def test_p_coin_ceiling_diagnostic():
    def crawling():
        eps = 0.25
        while True:
            yield 0.5, eps
            eps *= 0.9999
    with pytest.raises(PCoinCeilingError):
        toss_p_coin(None, crawling(), u=0.5, ceiling=100)
