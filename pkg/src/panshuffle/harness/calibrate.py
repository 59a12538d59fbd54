"""Empirical sample-complexity calibration for the amplified uniformity tester."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from scipy import stats

from ..sampling import ParameterError, RandomSource
from ..uniformity import (
    COMPRESSION_CONSTANT,
    CategoricalDist,
    FullTestConfig,
    half_flat,
    uniform_dist,
    ut_complexity_shape,
    ut_rejection_rate,
)

SAMPLE_CAP = 10_000_000


class CalibrationFailed(RuntimeError):
    pass


@dataclass(frozen=True)
class Calibration:
    m_star: int
    c_m: float
    far_power: float
    uniform_rate: float
    trials: int
    evaluations: int


def lower_bound(rate: float, trials: int, confidence: float) -> float:
    """One-sided Clopper-Pearson lower confidence bound on a success rate."""
    successes = round(rate * trials)
    if successes == 0:
        return 0.0
    return float(stats.beta.ppf(1.0 - confidence, successes, trials - successes + 1))


def calibrate_ut(
    k: int,
    alpha: float,
    eps: float,
    delta: float,
    target_power: float,
    rng: RandomSource,
    trials: int = 300,
    confidence: float = 0.9,
    repetitions: int = 19,
    far: Optional[CategoricalDist] = None,
    start: int = 16,
    rel_tol: float = 0.02,
    cap: int = SAMPLE_CAP,
    compression_constant: float = COMPRESSION_CONSTANT,
) -> Calibration:
    """Smallest ``m`` on a doubling-then-bisection schedule where both the
    far-distribution rejection rate and the uniform acceptance rate have a
    lower confidence bound of at least ``target_power``.

    Each candidate ``m`` is evaluated on its own random stream, so the search
    is reproducible from the seed alone.
    """
    if not 0.5 < target_power < 1.0:
        raise ParameterError("target power must lie in (1/2, 1)")
    far = far if far is not None else half_flat(k, alpha)
    unif = uniform_dist(k)
    evaluations = 0
    cache: dict[int, tuple[float, float]] = {}

    def rates(m: int) -> tuple[float, float]:
        nonlocal evaluations
        if m not in cache:
            cfg = FullTestConfig(k, alpha, eps, delta, m, repetitions=repetitions,
                                 compression_constant=compression_constant)
            src = rng.child(f"m={m}")
            power = ut_rejection_rate(far, cfg, trials, src.child("far"))
            accept = 1.0 - ut_rejection_rate(unif, cfg, trials, src.child("uniform"))
            cache[m] = (power, accept)
            evaluations += 1
        return cache[m]

    def good(m: int) -> bool:
        power, accept = rates(m)
        return (lower_bound(power, trials, confidence) >= target_power
                and lower_bound(accept, trials, confidence) >= target_power)

    hi = start
    while not good(hi):
        if hi >= cap:
            raise CalibrationFailed(f"no m <= {cap} reaches power {target_power}")
        hi = min(2 * hi, cap)
    lo = hi // 2 if hi > start else 0
    while hi - lo > max(1, math.ceil(rel_tol * hi)):
        mid = (lo + hi) // 2
        if good(mid):
            hi = mid
        else:
            lo = mid
    power, accept = rates(hi)
    return Calibration(
        m_star=hi,
        c_m=hi / ut_complexity_shape(k, alpha, eps, delta),
        far_power=power,
        uniform_rate=accept,
        trials=trials,
        evaluations=evaluations,
    )
