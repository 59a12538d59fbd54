"""Robustly shuffle-private distinct-elements counting, its hashed
large-universe variant, and the robust binary-sum protocol."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
import sympy

from .mod2sum import mod2_share_matrix, share_count
from .sampling import (
    ParameterError,
    RandomSource,
    check_privacy,
    noise_ratio_sq,
)
from .shuffle import MalformedTranscript, ProtocolSpec, Transcript, run_protocol

HASH_MODULUS_FLOOR = 2**31


@dataclass(frozen=True)
class DeParams:
    k: int
    n: int
    eps: float
    delta: float

    def __post_init__(self):
        if self.k < 1 or self.n < 1:
            raise ParameterError("k and n must be positive")
        check_privacy(self.eps, self.delta)

    @property
    def p_prime(self) -> float:
        # (1 - (1 - e^-eps)^(1/n)) / 2, written to survive tiny eps/n
        return -math.expm1(math.log1p(-math.exp(-self.eps)) / self.n) / 2.0

    @property
    def sigma(self) -> float:
        return math.log2((math.exp(self.eps) + 1.0) / self.delta)

    @property
    def shares(self) -> int:
        return share_count(self.sigma, self.n)

    @property
    def messages_per_user(self) -> int:
        return self.k * self.shares


def _check_element(x: int, k: int) -> int:
    if not 1 <= x <= k:
        raise ParameterError(f"element {x} outside [1, {k}]")
    return int(x)


def _label_rows(shares: np.ndarray, k: int) -> np.ndarray:
    # shares: (..., k, m) -> rows (label, bit)
    m = shares.shape[-1]
    labels = np.broadcast_to(np.arange(1, k + 1)[:, None], (k, m))
    labels = np.broadcast_to(labels, shares.shape)
    return np.stack([labels.reshape(-1), shares.reshape(-1)], axis=1)


def de_randomize(x: int, params: DeParams, rng: RandomSource) -> np.ndarray:
    """One user's labeled share messages.

    For each label ``j`` the user draws ``u_j ~ Ber(1/2)`` if ``x == j`` and
    ``Ber(p')`` otherwise, then splits ``u_j`` into parity shares.
    """
    x = _check_element(x, params.k)
    rate = np.full(params.k, params.p_prime)
    rate[x - 1] = 0.5
    u = (rng.gen.random(params.k) < rate).astype(np.int64)
    return _label_rows(mod2_share_matrix(u, params.shares, rng), params.k)


def de_randomize_batch(xs: Sequence[int], params: DeParams, rng: RandomSource) -> np.ndarray:
    xs = np.asarray(xs, dtype=np.int64)
    if xs.size and (xs.min() < 1 or xs.max() > params.k):
        raise ParameterError(f"elements outside [1, {params.k}]")
    hit = xs[:, None] == np.arange(1, params.k + 1)[None, :]
    u = (rng.gen.random(hit.shape) < np.where(hit, 0.5, params.p_prime)).astype(np.int64)
    return _label_rows(mod2_share_matrix(u, params.shares, rng), params.k)


def label_parities(t: Transcript, k: int) -> np.ndarray:
    """Per-label parity of the payloads, i.e. the mod-2 analyzer on each pool."""
    _, ones = t.label_counts(k)
    return ones % 2


def de_estimate(parity_total: float, k: int, eps: float) -> float:
    e = math.exp(eps)
    return (2.0 * parity_total * e - k) / (e - 1.0)


def de_analyze(t: Transcript, params: DeParams) -> float:
    """Raw de-biased estimate ``(2 C e^eps - k) / (e^eps - 1)``; not clamped."""
    parities = label_parities(t, params.k)
    return de_estimate(float(parities.sum()), params.k, params.eps)


def clamp_estimate(z: float, k: int) -> int:
    return int(min(max(round(z), 0), k))


def _de_randomizer(x, n, params: DeParams, rng):
    if n != params.n:
        raise ParameterError(f"protocol built for n={params.n}, run with n={n}")
    return de_randomize(x, params, rng)


def _de_batch(xs, n, params: DeParams, rng):
    if n != params.n:
        raise ParameterError(f"protocol built for n={params.n}, run with n={n}")
    return de_randomize_batch(xs, params, rng)


DE_PROTOCOL = ProtocolSpec(
    randomizer=_de_randomizer,
    analyzer=lambda t, n, params: de_analyze(t, params),
    name="distinct-elements",
    batch_randomizer=_de_batch,
)


def distinct_count(xs: Sequence[int]) -> int:
    return len(set(int(x) for x in xs))


def de_error_bound(k: int, eps: float, beta: float) -> float:
    if not 0.0 < beta < 1.0:
        raise ParameterError(f"beta must lie in (0, 1), got {beta}")
    e = math.exp(eps)
    return e / (e - 1.0) * math.sqrt(2.0 * k * math.log(2.0 / beta))


class EpsGamma(NamedTuple):
    exact: float
    additive_bound: float
    small_eps_bound: float  # only a valid bound when eps <= ln 2


def eps_gamma_bound(eps: float, gamma: float) -> EpsGamma:
    """Per-label privacy loss when only a ``gamma`` fraction of users is honest."""
    if not eps > 0:
        raise ParameterError("eps must be positive")
    if not 0.0 < gamma <= 1.0:
        raise ParameterError(f"gamma must lie in (0, 1], got {gamma}")
    # 1 - (1 - e^-eps)^gamma without cancellation at large eps
    exact = -math.log(-math.expm1(gamma * math.log1p(-math.exp(-eps))))
    return EpsGamma(
        exact=exact,
        additive_bound=eps + math.log(1.0 / gamma),
        small_eps_bound=2.0 * eps**gamma / gamma,
    )


def delta_gamma(eps: float, delta: float, gamma: float) -> float:
    """``(e^eps' + 1) / (e^eps + 1) * delta``: the per-label delta after drop-out."""
    exact = eps_gamma_bound(eps, gamma).exact
    return (math.exp(exact) + 1.0) / (math.exp(eps) + 1.0) * delta


def parity_bias(p: float, gamma: float) -> float:
    """Law of the parity of ``gamma * n`` draws of ``Ber(p')``: ``Ber((1-(1-2p)^gamma)/2)``."""
    if not 0.0 <= p <= 0.5:
        raise ParameterError(f"p must lie in [0, 1/2], got {p}")
    if not 0.0 < gamma <= 1.0:
        raise ParameterError(f"gamma must lie in (0, 1], got {gamma}")
    return (1.0 - (1.0 - 2.0 * p) ** gamma) / 2.0


def per_user_rate(p: float, n: int) -> float:
    """``p' = (1 - (1-2p)^(1/n)) / 2``, so that ``n`` draws have parity ``Ber(p)``."""
    return (1.0 - (1.0 - 2.0 * p) ** (1.0 / n)) / 2.0


# ---------------------------------------------------------------- hashing


@dataclass(frozen=True)
class UniversalHash:
    """Carter-Wegman ``x -> ((a x + b) mod p) mod k_prime``, output shifted to 1-based."""

    a: int
    b: int
    modulus: int
    k_prime: int

    def __post_init__(self):
        if not sympy.isprime(self.modulus):
            raise ParameterError(f"hash modulus {self.modulus} is not prime")
        if not (1 <= self.a < self.modulus and 0 <= self.b < self.modulus):
            raise ParameterError("hash coefficients out of range")
        if self.k_prime < 1:
            raise ParameterError("hash range must be positive")


def hash_modulus(k: int) -> int:
    return int(sympy.nextprime(max(k, HASH_MODULUS_FLOOR)))


def sample_hash(k: int, k_prime: int, rng: RandomSource) -> UniversalHash:
    if k_prime > k:
        raise ParameterError(f"hash range {k_prime} exceeds domain {k}")
    p = hash_modulus(k)
    a = int(rng.gen.integers(1, p))
    b = int(rng.gen.integers(0, p))
    return UniversalHash(a, b, p, k_prime)


def hash_apply(h: UniversalHash, x):
    if np.ndim(x) == 0:
        return (h.a * int(x) + h.b) % h.modulus % h.k_prime + 1
    xs = np.asarray(x, dtype=object if h.modulus > 3_000_000_000 else np.int64)
    return ((h.a * xs + h.b) % h.modulus % h.k_prime + 1).astype(np.int64)


def hashed_range(n: int, c: float = 1.0) -> int:
    if c < 1:
        raise ParameterError("the hashed range constant c must be at least 1")
    # round off float noise before the ceiling, e.g. 8 ** (4/3) = 15.999...
    return math.ceil(round(c * n ** (4.0 / 3.0), 9))


def hde_error_bound(n: int, c: float, beta: float, eps: float) -> float:
    e = math.exp(eps)
    return 2.0 * n ** (2.0 / 3.0) / (c * beta) + e / (e - 1.0) * math.sqrt(
        2.0 * (n ** (4.0 / 3.0) + 1.0) * math.log(4.0 / beta)
    )


def hde_run(inputs: Sequence[int], k: int, eps: float, delta: float, rng: RandomSource, c: float = 1.0) -> float:
    """Distinct elements over a large universe: hash ``[k]`` down to
    ``ceil(c n^(4/3))`` with a public 2-universal hash, then run the plain
    protocol there."""
    n = len(inputs)
    k_prime = hashed_range(n, c)
    if k < k_prime:
        warnings.warn(
            f"domain {k} is smaller than the hashed range {k_prime}; running the unhashed protocol",
            stacklevel=2,
        )
        return run_protocol(DE_PROTOCOL, list(inputs), DeParams(k, n, eps, delta), rng)
    h = sample_hash(k, k_prime, rng.child("public-hash"))
    hashed = hash_apply(h, np.asarray(inputs, dtype=np.int64))
    return run_protocol(DE_PROTOCOL, hashed, DeParams(k_prime, n, eps, delta), rng.child("users"))


# ------------------------------------------------------ robust binary sum


@dataclass(frozen=True)
class ZsumParams:
    n: int
    eps: float
    delta: float

    def __post_init__(self):
        check_privacy(self.eps, self.delta)
        need = zsum_min_users(self.eps, self.delta)
        if self.n < need:
            raise ParameterError(f"binary sum needs n >= {need:.2f} users, got {self.n}")

    @property
    def p(self) -> float:
        return 1.0 - 10.0 / self.n * noise_ratio_sq(self.eps) * math.log(2.0 / self.delta)


def zsum_min_users(eps: float, delta: float) -> float:
    return 20.0 * noise_ratio_sq(eps) * math.log(2.0 / delta)


def zsum_shuffle_randomize(bit: int, n: int, eps: float, delta: float, rng: RandomSource) -> np.ndarray:
    """The true bit plus one ``Ber(p)`` noise bit."""
    if bit not in (0, 1):
        raise ParameterError(f"bit must be 0 or 1, got {bit}")
    p = ZsumParams(n, eps, delta).p
    return np.array([bit, int(rng.gen.random() < p)], dtype=np.int64)


def zsum_shuffle_analyze(t: Transcript, params: ZsumParams) -> float:
    """Count of ones minus the expected noise ``n p``."""
    if t.labeled:
        raise MalformedTranscript("binary-sum transcripts carry bare bits")
    bits = t.messages
    if bits.size and (bits.min() < 0 or bits.max() > 1):
        raise MalformedTranscript("payloads must be bits")
    return float(bits.sum()) - params.n * params.p


def _zsum_batch(bits, n, params: ZsumParams, rng):
    bits = np.asarray(bits, dtype=np.int64)
    noise = (rng.gen.random(bits.size) < params.p).astype(np.int64)
    return np.concatenate([bits, noise])


ZSUM_PROTOCOL = ProtocolSpec(
    randomizer=lambda x, n, params, rng: zsum_shuffle_randomize(x, n, params.eps, params.delta, rng),
    analyzer=lambda t, n, params: zsum_shuffle_analyze(t, params),
    name="binary-sum",
    batch_randomizer=_zsum_batch,
)
