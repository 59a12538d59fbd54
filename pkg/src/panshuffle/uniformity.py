"""Robustly shuffle-private uniformity testing.

The preliminary tester sends one data message per domain element plus
Poisson-many uniform noise bits, and the analyzer thresholds a chi-square
style statistic of the de-biased counts. The final tester first compresses
the domain with a public random partition and amplifies by repetition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .sampling import ParameterError, RandomSource, check_privacy, noise_ratio_sq, poisson
from .shuffle import ProtocolSpec, Transcript, run_protocol

UNIFORM = "uniform"
NOT_UNIFORM = "not uniform"

DEFAULT_REPETITIONS = 19
DEFAULT_REJECT_FRACTION = 0.25
COMPRESSION_CONSTANT = 477.0


# ------------------------------------------------------------ parameters


def ut_lambda(eps: float, delta: float, k: int) -> int:
    """Per-element noise rate ``ceil(40 ((e^eps+1)/(e^eps-1))^2 ln(2k/delta))``."""
    check_privacy(eps, delta)
    if k < 1:
        raise ParameterError("k must be positive")
    return math.ceil(40.0 * noise_ratio_sq(eps) * math.log(2.0 * k / delta))


def ut_tau(alpha: float, m: float, k: int, lam: float) -> float:
    """Decision threshold: the uniform-case upper bound on the statistic."""
    if not m > 0:
        raise ParameterError("m must be positive")
    return (
        3.0 * alpha**2 * m / 250.0
        + k**2 / (2.0 * m) * lam
        + 5.0 * k**1.5 / m * lam
        + 10.0 * k / math.sqrt(m) * math.sqrt(lam)
        + 5.0 * k**1.5 / m * math.sqrt(lam)
    )


@dataclass(frozen=True)
class UtParams:
    k: int
    n: int
    m: float
    lam: float
    alpha: float
    tau: float

    @classmethod
    def build(cls, k: int, n: int, m: float, alpha: float, eps: float, delta: float) -> "UtParams":
        lam = ut_lambda(eps, delta, k)
        return cls(k=k, n=n, m=m, lam=lam, alpha=alpha, tau=ut_tau(alpha, m, k, lam))

    def with_users(self, n: int) -> "UtParams":
        return UtParams(self.k, n, self.m, self.lam, self.alpha, self.tau)


# ------------------------------------------------- randomizer and analyzer


def ut_randomize(x: int, params: UtParams, rng: RandomSource) -> np.ndarray:
    """One data message ``(j, 1{x=j})`` per label, plus ``Pois(lam/n)`` noise
    messages ``(j, Ber(1/2))`` per label."""
    k = params.k
    if not 1 <= x <= k:
        raise ParameterError(f"element {x} outside [1, {k}]")
    labels = np.arange(1, k + 1)
    data = np.stack([labels, (labels == x).astype(np.int64)], axis=1)
    s = poisson(params.lam / params.n, rng, size=k)
    noise_labels = np.repeat(labels, s)
    noise = np.stack([noise_labels, rng.gen.integers(0, 2, size=noise_labels.size)], axis=1)
    return np.concatenate([data, noise]).astype(np.int64)


def ut_randomize_batch(xs: Sequence[int], params: UtParams, rng: RandomSource) -> np.ndarray:
    xs = np.asarray(xs, dtype=np.int64)
    k = params.k
    if xs.size and (xs.min() < 1 or xs.max() > k):
        raise ParameterError(f"elements outside [1, {k}]")
    labels = np.arange(1, k + 1)
    data_labels = np.tile(labels, xs.size)
    data_bits = (data_labels == np.repeat(xs, k)).astype(np.int64)
    s = poisson(params.lam / params.n, rng, size=(xs.size, k))
    noise_labels = np.repeat(np.tile(labels, xs.size), s.reshape(-1))
    noise_bits = rng.gen.integers(0, 2, size=noise_labels.size)
    return np.stack(
        [np.concatenate([data_labels, noise_labels]), np.concatenate([data_bits, noise_bits])], axis=1
    ).astype(np.int64)


def ut_debias(totals: np.ndarray, ones: np.ndarray, n) -> np.ndarray:
    """``c_j = ones_j - l_j / 2`` with the recovered noise scale ``l_j = totals_j - n``."""
    n = np.asarray(n)
    ell = totals - (n[..., None] if n.ndim else n)
    return ones - ell / 2.0


def ut_statistic(counts: np.ndarray, m: float) -> np.ndarray:
    """``(k/m) sum_j [(c_j - m/k)^2 - c_j]`` over the last axis."""
    counts = np.asarray(counts, dtype=float)
    k = counts.shape[-1]
    return k / m * ((counts - m / k) ** 2 - counts).sum(axis=-1)


def ut_decide(statistic: float, tau: float) -> str:
    # ties go to "uniform"
    return NOT_UNIFORM if statistic > tau else UNIFORM


def ut_analyze(t: Transcript, params: UtParams) -> str:
    totals, ones = t.label_counts(params.k)
    z = float(ut_statistic(ut_debias(totals, ones, params.n), params.m))
    return ut_decide(z, params.tau)


def _ut_randomizer(x, n, params: UtParams, rng):
    return ut_randomize(x, params.with_users(n), rng)


def _ut_batch(xs, n, params: UtParams, rng):
    return ut_randomize_batch(xs, params.with_users(n), rng)


UT_PROTOCOL = ProtocolSpec(
    randomizer=_ut_randomizer,
    analyzer=lambda t, n, params: ut_analyze(t, params.with_users(n)),
    name="uniformity",
    batch_randomizer=_ut_batch,
)


def ut_noisy_counts(true_counts: np.ndarray, lam: float, n, rng: RandomSource) -> np.ndarray:
    """De-biased counts drawn straight from their law, skipping messages.

    Given ``n >= 1`` honest users the noise messages on a label number
    ``Pois(lam)`` (a sum of ``n`` independent ``Pois(lam/n)``) and carry
    ``Bin(l, 1/2)`` ones; the debiased count is ``c + Bin(l, 1/2) - l/2``.
    """
    true_counts = np.asarray(true_counts)
    n = np.asarray(n)
    ell = rng.gen.poisson(lam, size=true_counts.shape)
    if n.ndim:
        ell = np.where((n > 0)[..., None], ell, 0)
    elif n <= 0:
        ell = np.zeros_like(ell)
    return true_counts + rng.gen.binomial(ell, 0.5) - ell / 2.0


# ------------------------------------------------------- distributions


@dataclass(frozen=True)
class CategoricalDist:
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or p.size == 0 or (p < 0).any() or abs(p.sum() - 1.0) > 1e-9:
            raise ParameterError("probabilities must be a non-negative vector summing to 1")
        object.__setattr__(self, "probs", p)

    @property
    def k(self) -> int:
        return int(self.probs.size)

    def sample(self, size: int, rng: RandomSource) -> np.ndarray:
        return rng.gen.choice(self.k, size=size, p=self.probs) + 1

    def tv_to_uniform(self) -> float:
        return 0.5 * float(np.abs(self.probs - 1.0 / self.k).sum())

    def mixture(self, other: "CategoricalDist", weight: float) -> "CategoricalDist":
        """``weight * self + (1 - weight) * other``."""
        return CategoricalDist(weight * self.probs + (1.0 - weight) * other.probs)


def uniform_dist(k: int) -> CategoricalDist:
    return CategoricalDist(np.full(k, 1.0 / k))


def half_flat(k: int, alpha: float) -> CategoricalDist:
    """First half of the domain at ``(1+2 alpha)/k``, second half at
    ``(1-2 alpha)/k``; exactly ``alpha`` from uniform in TV."""
    if k % 2:
        raise ParameterError("the half-flat distribution needs an even domain size")
    if not 0.0 <= alpha <= 0.5:
        raise ParameterError(f"alpha must lie in [0, 1/2], got {alpha}")
    p = np.full(k, (1.0 - 2.0 * alpha) / k)
    p[: k // 2] = (1.0 + 2.0 * alpha) / k
    return CategoricalDist(p)


# --------------------------------------------------- domain compression


@dataclass(frozen=True)
class Partition:
    """Map from ``[k]`` onto ``[k_hat]`` groups.

    ``balanced`` partitions lay a uniformly random ordering of ``[k]`` along
    ``[0, k)`` and cut it into ``k_hat`` segments of length ``k/k_hat``; an
    element straddling a cut belongs to two groups with the overlap fractions
    as weights, so the uniform distribution compresses to the uniform one.
    ``independent`` partitions assign every element to a uniform group on its
    own.
    """

    k: int
    k_hat: int
    first: np.ndarray     # 0-based primary group of each element
    second: np.ndarray    # 0-based overflow group (== first when not split)
    weight: np.ndarray    # share of each element in its primary group
    mode: str = "balanced"

    @property
    def group_of(self) -> np.ndarray:
        """1-based primary group per element (index ``j-1``)."""
        return self.first + 1

    def weights(self) -> np.ndarray:
        """Dense ``k x k_hat`` matrix of element-to-group weights."""
        w = np.zeros((self.k, self.k_hat))
        rows = np.arange(self.k)
        np.add.at(w, (rows, self.first), self.weight)
        np.add.at(w, (rows, self.second), 1.0 - self.weight)
        return w

    def group_sizes(self) -> np.ndarray:
        return self.weights().sum(axis=0)


def segment_map(k: int, k_hat: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """For each slot ``s`` covering ``[s, s+1)``: its first segment, its second
    segment, and the fraction inside the first. Integer arithmetic only."""
    s = np.arange(k, dtype=np.int64)
    first = (s * k_hat) // k
    # overlap of [s, s+1) with segment `first`, scaled by k_hat
    overlap = np.minimum(k_hat, (first + 1) * k - s * k_hat)
    second = np.where(overlap < k_hat, first + 1, first)
    return first, np.minimum(second, k_hat - 1), overlap / k_hat


def _check_khat(k: int, k_hat: int) -> None:
    if k_hat > k:
        raise ParameterError(f"cannot compress [{k}] into {k_hat} > k groups")
    if k_hat < 1:
        raise ParameterError("k_hat must be positive")


def contiguous_partition(k: int, k_hat: int) -> Partition:
    _check_khat(k, k_hat)
    first, second, weight = segment_map(k, k_hat)
    return Partition(k, k_hat, first, second, weight, mode="balanced")


def sample_partition(k: int, k_hat: int, rng: RandomSource, mode: str = "balanced") -> Partition:
    _check_khat(k, k_hat)
    if mode == "independent":
        g = rng.gen.integers(0, k_hat, size=k)
        return Partition(k, k_hat, g, g.copy(), np.ones(k), mode=mode)
    if mode != "balanced":
        raise ParameterError(f"unknown partition mode {mode!r}")
    first, second, weight = segment_map(k, k_hat)
    slot = rng.gen.permutation(k)
    return Partition(k, k_hat, first[slot], second[slot], weight[slot], mode=mode)


def compress(partition: Partition, x, rng: Optional[RandomSource] = None):
    """1-based group of element ``x`` (scalar or array).

    Elements split between two groups go to one of them at random with the
    overlap weights, which needs ``rng``.
    """
    xs = np.asarray(x, dtype=np.int64)
    if xs.size and (xs.min() < 1 or xs.max() > partition.k):
        raise ParameterError(f"elements outside [1, {partition.k}]")
    idx = xs - 1
    first, second, weight = partition.first[idx], partition.second[idx], partition.weight[idx]
    split = weight < 1.0
    out = first.copy()
    if np.any(split):
        if rng is None:
            raise ParameterError("compressing a split element needs a RandomSource")
        go_second = rng.gen.random(np.shape(xs)) >= weight
        out = np.where(split & go_second, second, first)
    out = out + 1
    return int(out) if np.ndim(x) == 0 else out


def compressed_distribution(partition: Partition, probs) -> np.ndarray:
    """``P[D_G = g] = sum_j P[D = j] * w(j, g)``."""
    probs = np.asarray(probs, dtype=float)
    out = np.bincount(partition.first, weights=probs * partition.weight, minlength=partition.k_hat)
    out += np.bincount(partition.second, weights=probs * (1.0 - partition.weight), minlength=partition.k_hat)
    return out


def khat_rule(k: int, eps: float, alpha: float) -> int:
    raw = k ** (2.0 / 3.0) * eps ** (4.0 / 3.0) / alpha ** (4.0 / 3.0)
    if raw < 2:
        return 2
    if raw > k:
        return k
    return int(round(raw))


def alpha_hat(alpha: float, k: int, k_hat: int, constant: float = COMPRESSION_CONSTANT) -> float:
    """Testing distance left after compressing ``[k]`` to ``[k_hat]``."""
    return alpha * math.sqrt(k_hat) / (constant * math.sqrt(10.0 * k))


def ut_sample_complexity(k: int, alpha: float, eps: float, delta: float, c_m: float = 1.0) -> int:
    if not c_m > 0:
        raise ParameterError("the calibration constant must be positive")
    return math.ceil(c_m * ut_complexity_shape(k, alpha, eps, delta))


def ut_complexity_shape(k: int, alpha: float, eps: float, delta: float) -> float:
    """The sample-complexity expression without its leading constant."""
    terms = (
        k ** (2.0 / 3.0) / (alpha ** (4.0 / 3.0) * eps ** (2.0 / 3.0))
        + math.sqrt(k) / (alpha * eps)
        + math.sqrt(k) / alpha**2
    )
    return terms * math.sqrt(math.log(k / delta))


# ------------------------------------------------------------- moments


def moment_oracle(lambdas: Sequence[float], m: float, k: int) -> tuple[float, float, float]:
    """Closed forms ``(E[A], bound on Var[A], Var[C])`` given noise scales."""
    ell = np.asarray(lambdas, dtype=float)
    return (
        k / (4.0 * m) * float(ell.sum()),
        k**2 / (8.0 * m**2) * float((ell**2).sum()),
        k**2 / (4.0 * m**2) * float(ell.sum()),
    )


def ut_decompose(true_counts: np.ndarray, errors: np.ndarray, m: float):
    """Split the noisy statistic into ``Z + A + B - C`` over the last axis.

    ``errors`` are the count errors ``E_j = c_j(y) - c_j(x)``.
    """
    c = np.asarray(true_counts, dtype=float)
    e = np.asarray(errors, dtype=float)
    k = c.shape[-1]
    z = ut_statistic(c, m)
    a = k / m * (e**2).sum(axis=-1)
    b = 2.0 * k / m * (e * (c - m / k)).sum(axis=-1)
    cc = k / m * e.sum(axis=-1)
    return z, a, b, cc


# ---------------------------------------------------------- full tester


@dataclass(frozen=True)
class FullTestConfig:
    k: int
    alpha: float
    eps: float
    delta: float
    m: float
    repetitions: int = DEFAULT_REPETITIONS
    reject_fraction: float = DEFAULT_REJECT_FRACTION
    poissonize: bool = True
    compression_constant: float = COMPRESSION_CONSTANT
    k_hat: Optional[int] = None

    def __post_init__(self):
        check_privacy(self.eps, self.delta)
        if self.repetitions < 1:
            raise ParameterError("at least one repetition is required")
        if not 0.0 < self.alpha < 1.0:
            raise ParameterError("alpha must lie in (0, 1)")
        if not self.m > 0:
            raise ParameterError("m must be positive")

    @property
    def compressed_k(self) -> int:
        return self.k_hat if self.k_hat is not None else khat_rule(self.k, self.eps, self.alpha)

    @property
    def compressed_alpha(self) -> float:
        return alpha_hat(self.alpha, self.k, self.compressed_k, self.compression_constant)

    def prelim_params(self, n: int = 1) -> UtParams:
        return UtParams.build(self.compressed_k, n, self.m, self.compressed_alpha, self.eps, self.delta)

    def combine(self, rejections: int) -> str:
        return NOT_UNIFORM if rejections > self.reject_fraction * self.repetitions else UNIFORM


def ut_full_test(source: CategoricalDist, config: FullTestConfig, rng: RandomSource) -> str:
    """Amplified tester, run message by message.

    Each repetition draws a fresh public partition and ``n ~ Pois(m)`` samples
    (``m`` of them when not Poissonized), compresses them, and runs the
    preliminary protocol on ``[k_hat]``.
    """
    if source.k != config.k:
        raise ParameterError("source and config disagree on k")
    base = config.prelim_params()
    rejections = 0
    for r in range(config.repetitions):
        rep = rng.child(("repetition", r).__repr__())
        partition = sample_partition(config.k, base.k, rep.child("public-partition"))
        n = int(rep.gen.poisson(config.m)) if config.poissonize else int(round(config.m))
        if n == 0:
            continue
        xs = compress(partition, source.sample(n, rep.child("data")), rep.child("split"))
        decision = run_protocol(UT_PROTOCOL, list(xs), base.with_users(n), rep.child("users"))
        rejections += decision == NOT_UNIFORM
    return config.combine(rejections)


def prelim_reject_flags(probs: np.ndarray, config: FullTestConfig, rows: int, rng: RandomSource,
                        partition_mode: str = "balanced") -> np.ndarray:
    """``rows`` independent repetitions of the compressed preliminary test,
    simulated from count laws. Returns one reject flag per repetition."""
    base = config.prelim_params()
    k, k_hat = config.k, base.k
    if partition_mode == "balanced":
        first, second, weight = segment_map(k, k_hat)
        slots = rng.gen.permuted(np.broadcast_to(np.arange(k), (rows, k)), axis=1)
        first, second, weight = first[slots], second[slots], weight[slots]
    else:
        first = rng.gen.integers(0, k_hat, size=(rows, k))
        second, weight = first, np.ones((rows, k))
    offset = (np.arange(rows) * k_hat)[:, None]
    mass = np.bincount((first + offset).ravel(), weights=(probs * weight).ravel(), minlength=rows * k_hat)
    mass += np.bincount((second + offset).ravel(), weights=(probs * (1.0 - weight)).ravel(), minlength=rows * k_hat)
    mass = mass.reshape(rows, k_hat)
    if config.poissonize:
        # Poissonized multinomial counts are independent Poissons
        counts = rng.gen.poisson(config.m * mass)
    else:
        mass = mass / mass.sum(axis=1, keepdims=True)
        counts = rng.gen.multinomial(int(round(config.m)), mass)
    n = counts.sum(axis=1)
    noisy = ut_noisy_counts(counts, base.lam, n, rng)
    return ut_statistic(noisy, config.m) > base.tau


def ut_rejection_rate(source: CategoricalDist, config: FullTestConfig, trials: int, rng: RandomSource,
                      chunk_rows: int = 4000) -> float:
    """Fraction of amplified tests answering "not uniform", simulated from
    count laws (equal in distribution to :func:`ut_full_test`)."""
    reps = config.repetitions
    per_chunk = max(1, chunk_rows // reps)
    rejected, done, part = 0, 0, 0
    while done < trials:
        batch = min(per_chunk, trials - done)
        flags = prelim_reject_flags(source.probs, config, batch * reps, rng.child(part))
        votes = flags.reshape(batch, reps).sum(axis=1)
        rejected += int((votes > config.reject_fraction * reps).sum())
        done += batch
        part += 1
    return rejected / trials
