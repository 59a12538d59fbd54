import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from panshuffle.audit import EmpiricalDist, tv_distance
from panshuffle.distinct import DE_PROTOCOL, DeParams
from panshuffle.pan import (
    PanHistogram,
    QZsum,
    ShuffleToPanDE,
    ShuffleToPanUT,
    StreamError,
    debias,
    intrusion_view,
    pan_from_shuffle_de,
    pan_from_shuffle_ut,
    pan_histogram,
    padded_input,
    pool_transcript,
    run_online,
    zsum_lambda,
    zsum_run,
)
from panshuffle.sampling import ParameterError, RandomSource
from panshuffle.shuffle import run_protocol
from panshuffle.uniformity import NOT_UNIFORM, UtParams, half_flat


def chisquare_pvalue(observed, expected):
    # pool cells with expected count below 5 into one
    keep = expected >= 5
    obs, exp = observed[keep], expected[keep]
    if (~keep).any() and expected[~keep].sum() > 0:
        obs = np.append(obs, observed[~keep].sum())
        exp = np.append(exp, expected[~keep].sum())
    return stats.chisquare(obs, exp * obs.sum() / exp.sum()).pvalue


def test_zsum_lambda_value():
    # 20 * coth(1/2)^2 * ln(20) = 280.56...
    assert zsum_lambda(1.0, 0.1) == 281


def test_zsum_examples(rng):
    assert zsum_run([], 0, rng) == 0
    assert zsum_run([1, 0, 1], 0, rng) == 2
    with pytest.raises(StreamError):
        zsum_run([1, 2], 3, rng)
    with pytest.raises(ParameterError):
        QZsum(-1)
    with pytest.raises(ParameterError):
        QZsum(2.5)


@given(st.lists(st.integers(0, 1), max_size=40), st.integers(0, 30), st.integers(0, 2**32))
def test_zsum_output_bounds(bits, lam, seed):
    out = zsum_run(bits, lam, RandomSource(seed))
    assert sum(bits) <= out <= sum(bits) + 2 * lam


def test_zsum_unbiased_after_debias(rng):
    lam = 281
    outs = np.array([debias(zsum_run([1] * 50 + [0] * 50, lam, rng.child(i)), lam) for i in range(4000)])
    assert abs(outs.mean() - 50) <= 3 * outs.std(ddof=1) / math.sqrt(outs.size)
    # Bin(lam,1/2) + Bin(lam,1/2) has variance lam/2
    assert outs.var() == pytest.approx(lam / 2, rel=0.1)


def test_initial_state_law(rng):
    lam = 12
    states = np.array([int(run_online(QZsum(lam), [1, 1], rng.child(i), snapshot_times=[0]).snapshots[0].value)
                       for i in range(20_000)])
    observed = np.bincount(states, minlength=lam + 1)
    expected = stats.binom.pmf(np.arange(lam + 1), lam, 0.5) * states.size
    assert chisquare_pvalue(observed, expected) > 1e-3


def test_snapshot_does_not_perturb():
    stream = [1, 0, 1, 1, 0, 1]
    plain = run_online(QZsum(20), stream, RandomSource(9))
    watched = run_online(QZsum(20), stream, RandomSource(9), snapshot_times=[0, 3, 6])
    assert plain.output == watched.output
    assert int(watched.snapshots[6].value) - int(watched.snapshots[0].value) == sum(stream)
    state, out = intrusion_view(watched, 3)
    assert state.t == 3 and out == watched.output
    with pytest.raises(ParameterError):
        intrusion_view(watched, 2)
    with pytest.raises(ParameterError):
        run_online(QZsum(20), stream, RandomSource(9), snapshot_times=[7])


def test_snapshot_is_read_only(rng):
    run = run_online(PanHistogram(3, 5), [1, 2], rng, snapshot_times=[1])
    with pytest.raises(ValueError):
        run.snapshots[1].value[0] = 99


def test_histogram(rng):
    res = pan_histogram([], 4, 0, rng)
    assert res.raw.tolist() == [0, 0, 0, 0]
    res = pan_histogram([1, 1, 3], 4, 0, rng)
    assert res.debiased.tolist() == [2, 0, 1, 0]
    outs = np.array([pan_histogram([1, 1, 3], 4, 30, rng.child(i)).debiased for i in range(3000)])
    se = outs.std(axis=0, ddof=1) / math.sqrt(len(outs))
    assert np.all(np.abs(outs.mean(axis=0) - [2, 0, 1, 0]) <= 3 * se)
    with pytest.raises(StreamError):
        pan_histogram([5], 4, 3, rng)


def test_histogram_update_many_matches_update(rng):
    alg = PanHistogram(5, 0)
    state = alg.init(rng)
    stepwise = state
    for x in [2, 5, 5, 1]:
        stepwise = alg.update(stepwise, x, rng)
    assert np.array_equal(alg.update_many(state, [2, 5, 5, 1], rng), stepwise)


def test_de_transform_checks(rng):
    with pytest.raises(ParameterError):
        ShuffleToPanDE(DeParams(2, 5, 1.0, 0.1), 2)
    params = DeParams(2, 6, 1.0, 0.1)
    with pytest.raises(ParameterError):
        pan_from_shuffle_de([1, 2, 1], params, rng)
    with pytest.raises(StreamError):
        run_online(ShuffleToPanDE(params, 2), [1, 2, 1], rng)
    with pytest.raises(StreamError):
        pan_from_shuffle_de([1, 3], params, rng)
    assert padded_input([2, 1]) == [1, 1, 2, 1, 1, 1]


def test_de_transform_matches_protocol(rng):
    params = DeParams(2, 6, 1.0, 0.1)
    stream = [2, 2]
    trials = 20_000
    pan = [pan_from_shuffle_de(stream, params, rng.child(("pan", i))).output for i in range(trials)]
    direct = [run_protocol(DE_PROTOCOL, padded_input(stream), params, rng.child(("dir", i))) for i in range(trials)]
    P = EmpiricalDist.from_samples(np.round(pan, 9))
    Q = EmpiricalDist.from_samples(np.round(direct, 9))
    assert tv_distance(P, Q) <= P.half_width() + Q.half_width()


def test_de_snapshot_pool(rng):
    params = DeParams(2, 6, 1.0, 0.1)
    run = pan_from_shuffle_de([2, 1], params, rng, snapshot_times=[0, 1, 2])
    for t in (0, 1, 2):
        pool = pool_transcript(run.snapshots[t], 6)
        assert len(pool) == (2 + t) * params.messages_per_user
    order = run.snapshots[2].value
    assert np.array_equal(order, order[np.lexsort(order.T[::-1])])


def test_ut_transform_clamp_law(rng):
    L = 10
    params = UtParams.build(3, 3 * L, 3 * L, 0.5, 1.0, 0.1)
    n_primes = []
    for i in range(20_000):
        alg = ShuffleToPanUT(params, L)
        alg.init(rng.child(i))
        n_primes.append(alg.n_prime)
    observed = np.bincount(n_primes, minlength=L + 1)
    pmf = stats.binom.pmf(np.arange(L + 1), 3 * L, 2 / 9)
    pmf[L] += stats.binom.sf(L, 3 * L, 2 / 9)
    expected = pmf * len(n_primes)
    assert chisquare_pvalue(observed, expected) > 1e-3


def test_ut_transform_keeps_prefix(rng):
    L = 30
    params = UtParams.build(3, 3 * L, 3 * L, 0.5, 1.0, 0.1)
    run = pan_from_shuffle_ut([1] * L, params, rng, snapshot_times=[5])
    assert run.meta["real_samples"] == run.meta["n_prime"] <= L
    assert run.snapshots[5].meta["real_samples"] == min(5, run.meta["n_prime"])


def test_ut_transform_far_stream(rng):
    # stream at distance 9 alpha / 2 leaves a mixture at distance about alpha
    k, alpha, L = 4, 1 / 9, 500
    params = UtParams.build(k, 3 * L, 3 * L, alpha, 1.0, 0.1)
    far = half_flat(k, 4.5 * alpha)
    runs = 60
    rejected = sum(
        pan_from_shuffle_ut(far.sample(L, rng.child(("s", i))), params, rng.child(i)).output == NOT_UNIFORM
        for i in range(runs)
    )
    assert rejected / runs >= 0.5
