import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from panshuffle.sampling import (
    ParameterError,
    PrivacyParams,
    RandomSource,
    bernoulli,
    binomial,
    binomial_mechanism,
    binomial_privacy_eps,
    binomial_privacy_ok,
    noise_ratio_sq,
    poisson,
)


def test_same_seed_same_draws():
    a, b = RandomSource(7), RandomSource(7)
    assert np.array_equal(a.gen.integers(0, 1 << 30, 50), b.gen.integers(0, 1 << 30, 50))
    assert np.array_equal(a.child("x").gen.random(10), b.child("x").gen.random(10))


def test_children_are_distinct_streams():
    parent = RandomSource(1)
    x = parent.child(0).gen.random(20_000)
    y = parent.child(1).gen.random(20_000)
    assert not np.array_equal(x, y)
    assert abs(np.corrcoef(x, y)[0, 1]) < 0.03
    assert not np.array_equal(parent.child("a").gen.random(5), parent.child("b").gen.random(5))


def test_bernoulli_edges_and_mean(rng):
    assert bernoulli(0.0, rng, size=1000).sum() == 0
    assert bernoulli(1.0, rng, size=1000).sum() == 1000
    assert abs(bernoulli(0.25, rng, size=100_000).mean() - 0.25) <= 0.01
    with pytest.raises(ParameterError):
        bernoulli(1.5, rng)


def test_binomial_edges_and_mean(rng):
    assert binomial(0, 0.3, rng) == 0
    assert binomial(10, 1.0, rng) == 10
    assert abs(binomial(1000, 0.5, rng, size=10_000).mean() - 500) <= 5
    with pytest.raises(ParameterError):
        binomial(-1, 0.5, rng)


def test_binomial_matches_bernoulli_sums(rng):
    draws = binomial(20, 0.3, rng, size=100_000)
    observed = np.bincount(draws, minlength=21)
    expected = stats.binom.pmf(np.arange(21), 20, 0.3) * draws.size
    keep = expected >= 5
    obs = np.append(observed[keep], observed[~keep].sum())
    exp = np.append(expected[keep], expected[~keep].sum())
    assert stats.chisquare(obs, exp * obs.sum() / exp.sum()).pvalue > 1e-3


def test_poisson_zero_and_mean(rng):
    assert poisson(0, rng) == 0
    assert np.all(poisson(0, rng, size=10) == 0)
    assert abs(poisson(3.5, rng, size=100_000).mean() - 3.5) <= 0.02


def test_poisson_tail_at_100(rng):
    draws = poisson(100, rng, size=100_000)
    assert np.mean(np.abs(draws - 100) >= 50) <= 2 * math.exp(-50**2 / (2 * 150))


@pytest.mark.parametrize("lam", [0.3, 4.0, 29.5])
def test_poisson_inversion_law(rng, lam):
    draws = poisson(lam, rng, size=50_000)
    top = int(lam + 6 * math.sqrt(lam) + 5)
    observed = np.bincount(np.minimum(draws, top), minlength=top + 1)
    expected = stats.poisson.pmf(np.arange(top + 1), lam)
    expected[-1] += stats.poisson.sf(top, lam)
    keep = expected * draws.size >= 5
    obs = np.append(observed[keep], observed[~keep].sum())
    exp = np.append(expected[keep], expected[~keep].sum()) * draws.size
    assert stats.chisquare(obs, exp * obs.sum() / exp.sum()).pvalue > 1e-3


def test_binomial_mechanism(rng):
    assert binomial_mechanism(7, 0, 0.5, rng) == 7
    outs = [binomial_mechanism(0, 40, 0.5, rng) for _ in range(2000)]
    assert min(outs) >= 0 and max(outs) <= 40
    assert abs(np.mean([binomial_mechanism(5, 100, 0.5, rng) for _ in range(10_000)]) - 55) <= 1.5


@given(value=st.integers(-1000, 1000), l=st.integers(0, 200), p=st.floats(0, 1), seed=st.integers(0, 2**32))
def test_binomial_mechanism_moves_up_by_at_most_l(value, l, p, seed):
    out = binomial_mechanism(value, l, p, RandomSource(seed))
    assert value <= out <= value + l


def test_binomial_privacy_threshold():
    # threshold 10 * coth(1/2)^2 * ln 20 = 140.2809867...
    assert binomial_privacy_ok(281, 0.5, 1.0, 0.1)
    assert not binomial_privacy_ok(280, 0.5, 1.0, 0.1)
    assert not binomial_privacy_ok(0, 0.5, 1.0, 0.1)


def test_binomial_privacy_eps_inverts_threshold():
    assert binomial_privacy_eps(281, 0.5, 0.1) == pytest.approx(0.999083876990467, rel=1e-12)
    assert binomial_privacy_eps(20, 0.5, 0.1) == math.inf
    assert binomial_privacy_eps(0, 0.5, 0.1) == math.inf


@given(l=st.integers(1, 10**6), p=st.floats(0.01, 0.99), delta=st.floats(1e-9, 0.5))
def test_binomial_privacy_eps_is_the_boundary(l, p, delta):
    eps = binomial_privacy_eps(l, p, delta)
    if math.isfinite(eps) and eps > 1e-6:
        assert binomial_privacy_ok(l, p, eps * (1 + 1e-9), delta)
        assert not binomial_privacy_ok(l, p, eps * (1 - 1e-6), delta)


def test_noise_ratio():
    assert noise_ratio_sq(1.0) == pytest.approx(((math.e + 1) / (math.e - 1)) ** 2, rel=1e-14)
    assert noise_ratio_sq(50.0) == pytest.approx(1.0)


@pytest.mark.parametrize("eps,delta,gamma", [(0, 0.1, 1), (1, 0, 1), (1, 1, 1), (1, 0.1, 0), (1, 0.1, 1.5)])
def test_privacy_params_validation(eps, delta, gamma):
    with pytest.raises(ParameterError):
        PrivacyParams(eps, delta, gamma)
