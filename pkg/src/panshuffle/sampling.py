"""Seedable randomness, the discrete draws every protocol uses, and the
binomial mechanism's privacy condition."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Union

import numpy as np

# Exact inversion is used at or below this rate; above it numpy's PTRS
# transformed-rejection sampler takes over.
POISSON_INVERSION_MAX = 30.0


class ParameterError(ValueError):
    """A probability, rate, or privacy parameter outside its valid range."""


def _stream_key(stream_id: Hashable) -> int:
    if isinstance(stream_id, (int, np.integer)):
        if stream_id < 0:
            raise ParameterError("stream ids must be non-negative")
        return int(stream_id)
    # stable across processes, unlike hash()
    digest = 0
    for ch in str(stream_id).encode("utf-8"):
        digest = (digest * 131 + ch) % (1 << 61)
    return digest + (1 << 62)


class RandomSource:
    """Explicit, replayable source of randomness.

    Wraps a numpy ``Generator`` seeded from a ``SeedSequence``. Children
    derived with distinct stream ids get independent streams, so trial ``i``
    of an experiment can be replayed without rerunning trials ``0..i-1``.
    """

    def __init__(self, seed: int = 0, _path: tuple = ()):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._path = tuple(_path)
        self._seq = np.random.SeedSequence(self.seed, spawn_key=self._path)
        self.gen = np.random.Generator(np.random.PCG64(self._seq))

    def child(self, stream_id: Hashable) -> "RandomSource":
        return RandomSource(self.seed, self._path + (_stream_key(stream_id),))

    def children(self, count: int) -> list["RandomSource"]:
        return [self.child(i) for i in range(count)]

    def __repr__(self) -> str:
        return f"RandomSource(seed={self.seed}, path={self._path})"


def as_source(rng: Union[RandomSource, int, None]) -> RandomSource:
    if isinstance(rng, RandomSource):
        return rng
    if rng is None:
        raise ParameterError("an explicit RandomSource (or integer seed) is required")
    return RandomSource(int(rng))


@dataclass(frozen=True)
class PrivacyParams:
    eps: float
    delta: float
    gamma: float = 1.0

    def __post_init__(self):
        check_privacy(self.eps, self.delta)
        if not 0.0 < self.gamma <= 1.0:
            raise ParameterError(f"gamma must lie in (0, 1], got {self.gamma}")


def check_probability(p: float, name: str = "p") -> float:
    if not (0.0 <= p <= 1.0):
        raise ParameterError(f"{name} must lie in [0, 1], got {p}")
    return float(p)


def check_privacy(eps: float, delta: float) -> None:
    if not eps > 0:
        raise ParameterError(f"eps must be positive, got {eps}")
    if not 0.0 < delta < 1.0:
        raise ParameterError(f"delta must lie in (0, 1), got {delta}")


def noise_ratio_sq(eps: float) -> float:
    """((e^eps + 1) / (e^eps - 1))^2, the factor shared by every binomial
    noise calibration in the package."""
    if not eps > 0:
        raise ParameterError(f"eps must be positive, got {eps}")
    # coth(eps/2) == (e^eps+1)/(e^eps-1), stable for large eps
    return (1.0 / math.tanh(eps / 2.0)) ** 2


def bernoulli(p: float, rng: RandomSource, size=None):
    p = check_probability(p)
    draws = rng.gen.random(size) < p
    if size is None:
        return int(draws)
    return draws.astype(np.int8)


def binomial(l: int, p: float, rng: RandomSource, size=None):
    if l < 0:
        raise ParameterError(f"l must be non-negative, got {l}")
    p = check_probability(p)
    out = rng.gen.binomial(int(l), p, size)
    return int(out) if size is None else out


def _poisson_inversion(lam: float, u: np.ndarray) -> np.ndarray:
    # cdf table out to where the remaining tail is below double precision
    top = int(lam + 12.0 * math.sqrt(lam) + 30)
    ks = np.arange(top + 1)
    logpmf = ks * math.log(lam) - lam - np.array([math.lgamma(k + 1) for k in ks])
    cdf = np.cumsum(np.exp(logpmf))
    return np.minimum(np.searchsorted(cdf, u, side="right"), top)


def poisson(lam: float, rng: RandomSource, size=None):
    if not lam >= 0:
        raise ParameterError(f"lambda must be non-negative, got {lam}")
    if lam == 0:
        return 0 if size is None else np.zeros(size, dtype=np.int64)
    if lam <= POISSON_INVERSION_MAX:
        u = rng.gen.random(size)
        out = _poisson_inversion(lam, np.atleast_1d(u))
        return int(out[0]) if size is None else out.reshape(np.shape(u)).astype(np.int64)
    out = rng.gen.poisson(lam, size)
    return int(out) if size is None else out


def binomial_mechanism(value: int, l: int, p: float, rng: RandomSource) -> int:
    """Release ``value + Bin(l, p)``; the shift is always in ``[0, l]``."""
    return int(value) + binomial(l, p, rng)


def binomial_privacy_ok(l: int, p: float, eps: float, delta: float) -> bool:
    """True iff ``l * min(p, 1-p) >= 10 * ((e^eps+1)/(e^eps-1))^2 * ln(2/delta)``."""
    check_probability(p)
    check_privacy(eps, delta)
    if l <= 0:
        return False
    return l * min(p, 1.0 - p) >= 10.0 * noise_ratio_sq(eps) * math.log(2.0 / delta)


def binomial_privacy_eps(l: int, p: float, delta: float) -> float:
    """Smallest eps for which :func:`binomial_privacy_ok` holds, or ``inf``.

    Inverts the threshold: with ``r^2 = l*min(p,1-p) / (10 ln(2/delta))`` the
    condition reads ``coth(eps/2) <= r``, i.e. ``eps >= ln((r+1)/(r-1))``.
    """
    check_probability(p)
    if not 0.0 < delta < 1.0:
        raise ParameterError(f"delta must lie in (0, 1), got {delta}")
    if l <= 0:
        return math.inf
    r_sq = l * min(p, 1.0 - p) / (10.0 * math.log(2.0 / delta))
    if r_sq <= 1.0:
        return math.inf
    r = math.sqrt(r_sq)
    return math.log((r + 1.0) / (r - 1.0))
