"""Empirical and exact privacy audits: distributions over canonically encoded
outcomes, hockey-stick divergence, total variation, and confidence bounds.

Audits are evidence, not proofs. Every report carries its mode (``exact`` or
``monte-carlo``), the trial count, and a half-width; acceptance checks consume
the upper end.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Hashable, Mapping, Optional, Sequence

import numpy as np
from scipy import stats

from .sampling import ParameterError, RandomSource, as_source

DEFAULT_CONFIDENCE = 0.99
DEFAULT_OUTCOME_CAP = 1_000_000


class EncodingMismatch(ValueError):
    pass


class OutcomeSpaceError(RuntimeError):
    """Too many distinct outcomes for a frequency table; use exact mode."""


@dataclass(frozen=True)
class MonteCarloEstimate:
    value: float
    half_width: float
    trials: int

    @property
    def upper(self) -> float:
        return self.value + self.half_width

    @property
    def lower(self) -> float:
        return self.value - self.half_width


@dataclass
class EmpiricalDist:
    """Probabilities over hashable outcomes.

    ``trials`` is ``None`` for an exact distribution; otherwise the
    probabilities are frequencies from that many draws.
    """

    probs: dict
    trials: Optional[int] = None
    encoding: str = "raw"
    counts: Optional[dict] = field(default=None, repr=False)

    def __post_init__(self):
        total = math.fsum(self.probs.values())
        if self.probs and abs(total - 1.0) > 1e-9:
            raise ParameterError(f"probabilities sum to {total}, not 1")
        if any(v < 0 for v in self.probs.values()):
            raise ParameterError("negative probability")

    @classmethod
    def from_counts(cls, counts: Mapping[Hashable, int], encoding: str = "raw") -> "EmpiricalDist":
        if any(c < 0 for c in counts.values()):
            raise ParameterError("negative count")
        counts = {o: int(c) for o, c in counts.items() if c > 0}
        n = sum(counts.values())
        if n == 0:
            raise ParameterError("no samples")
        return cls({o: c / n for o, c in counts.items()}, trials=n, encoding=encoding, counts=counts)

    @classmethod
    def from_samples(cls, samples, encoding: str = "raw") -> "EmpiricalDist":
        """Frequency table of a 1-d array of scalars or a 2-d array of rows."""
        arr = np.asarray(samples)
        if arr.ndim == 1:
            keys, cnt = np.unique(arr, return_counts=True)
            return cls.from_counts({k.item(): c for k, c in zip(keys, cnt)}, encoding)
        keys, cnt = np.unique(arr.reshape(arr.shape[0], -1), axis=0, return_counts=True)
        return cls.from_counts({tuple(k.tolist()): c for k, c in zip(keys, cnt)}, encoding)

    @classmethod
    def exact(cls, probs: Mapping[Hashable, float], encoding: str = "raw") -> "EmpiricalDist":
        return cls({o: float(p) for o, p in probs.items() if p > 0}, trials=None, encoding=encoding)

    @property
    def mode(self) -> str:
        return "exact" if self.trials is None else "monte-carlo"

    @property
    def support(self) -> list:
        return list(self.probs)

    def prob(self, outcome) -> float:
        return self.probs.get(outcome, 0.0)

    def half_width(self, confidence: float = DEFAULT_CONFIDENCE) -> float:
        """Bound on ``tv(self, truth)`` holding with the given confidence.

        Mean term ``(1/2) sum_o sqrt(p(1-p)/N)`` (plug-in) plus a McDiarmid
        deviation term: the L1 error moves by at most ``2/N`` per draw.
        """
        if self.trials is None:
            return 0.0
        n = self.trials
        p = np.fromiter(self.probs.values(), dtype=float)
        mean_l1 = float(np.sqrt(p * (1 - p) / n).sum())
        dev_l1 = math.sqrt(2.0 * math.log(1.0 / (1.0 - confidence)) / n)
        return 0.5 * (mean_l1 + dev_l1)


def _check_encoding(P: EmpiricalDist, Q: EmpiricalDist) -> None:
    if P.encoding != Q.encoding:
        raise EncodingMismatch(f"cannot compare {P.encoding!r} with {Q.encoding!r}")


def hockey_stick(P: EmpiricalDist, Q: EmpiricalDist, eps: float) -> float:
    """``sum_o max(0, P(o) - e^eps Q(o))``: the least delta making P
    (eps, delta)-indistinguishable from Q in that direction."""
    _check_encoding(P, Q)
    if math.isinf(eps):
        # only outcomes Q never produces are left uncovered
        return math.fsum(p for o, p in P.probs.items() if Q.prob(o) == 0.0)
    scale = math.exp(eps)
    return math.fsum(max(0.0, p - scale * Q.prob(o)) for o, p in P.probs.items())


def tv_distance(P: EmpiricalDist, Q: EmpiricalDist) -> float:
    _check_encoding(P, Q)
    keys = set(P.probs) | set(Q.probs)
    return 0.5 * math.fsum(abs(P.prob(o) - Q.prob(o)) for o in keys)


def empirical_dist(
    sampler: Callable[[RandomSource], Hashable],
    trials: int,
    rng: RandomSource,
    encoding: str = "raw",
    cap: int = DEFAULT_OUTCOME_CAP,
) -> EmpiricalDist:
    rng = as_source(rng)
    counts: Counter = Counter()
    for _ in range(trials):
        counts[sampler(rng)] += 1
        if len(counts) > cap:
            raise OutcomeSpaceError(
                f"more than {cap} distinct outcomes; use an exact computation instead"
            )
    return EmpiricalDist.from_counts(counts, encoding)


def bernstein_half_width(p_hat: float, n: int, confidence: float = DEFAULT_CONFIDENCE) -> float:
    """Empirical-Bernstein half-width for a Bernoulli mean (Maurer-Pontil)."""
    if n < 2:
        return 1.0
    log_term = math.log(2.0 / (1.0 - confidence))
    return math.sqrt(2.0 * p_hat * (1.0 - p_hat) * log_term / n) + 7.0 * log_term / (3.0 * (n - 1))


@dataclass(frozen=True)
class AuditReport:
    eps_tested: float
    delta_hat: float
    delta_half_width: float
    tv_hat: float
    tv_half_width: float
    trials: Optional[int]
    mode: str
    confidence: float = DEFAULT_CONFIDENCE

    @property
    def delta_upper(self) -> float:
        return self.delta_hat + self.delta_half_width

    @property
    def tv_upper(self) -> float:
        return self.tv_hat + self.tv_half_width


def _directional_half_width(P: EmpiricalDist, Q: EmpiricalDist, eps: float, confidence: float) -> float:
    scale = math.exp(eps)
    if math.isinf(scale):
        event = [o for o in P.probs if Q.prob(o) == 0.0]
        scale = 0.0
    else:
        event = [o for o, p in P.probs.items() if p > scale * Q.prob(o)]
    hw = 0.0
    if P.trials is not None:
        hw += bernstein_half_width(math.fsum(P.prob(o) for o in event), P.trials, confidence)
    if Q.trials is not None:
        hw += scale * bernstein_half_width(math.fsum(Q.prob(o) for o in event), Q.trials, confidence)
    return hw


def audit_pair(P: EmpiricalDist, Q: EmpiricalDist, eps: float, confidence: float = DEFAULT_CONFIDENCE) -> AuditReport:
    """Two-sided (eps, delta) audit of a neighboring pair of output laws.

    The delta half-width is an empirical-Bernstein bound on both event
    probabilities, with the variance read off the empirically worst event.
    """
    _check_encoding(P, Q)
    forward, backward = hockey_stick(P, Q, eps), hockey_stick(Q, P, eps)
    if forward >= backward:
        delta_hat, hw = forward, _directional_half_width(P, Q, eps, confidence)
    else:
        delta_hat, hw = backward, _directional_half_width(Q, P, eps, confidence)
    exact = P.trials is None and Q.trials is None
    trials = None if exact else min(t for t in (P.trials, Q.trials) if t is not None)
    return AuditReport(
        eps_tested=eps,
        delta_hat=delta_hat,
        delta_half_width=hw,
        tv_hat=tv_distance(P, Q),
        tv_half_width=P.half_width(confidence) + Q.half_width(confidence),
        trials=trials,
        mode="exact" if exact else "monte-carlo",
        confidence=confidence,
    )


def encode_transcript(transcript, k: Optional[int] = None) -> tuple:
    """Canonical, order-free encoding of a transcript.

    For labeled messages: per label ``(zero-payload count, one-payload count)``,
    which is the sorted multiset of ``(label, payload)`` pairs in count form.
    For unlabeled bits: ``(count of zeros, count of ones)``.
    """
    if transcript.labeled:
        if k is None:
            k = int(transcript.messages[:, 0].max()) if len(transcript) else 0
        totals, ones = transcript.label_counts(k)
        return tuple(int(v) for pair in zip(totals - ones, ones) for v in pair)
    ones = int(transcript.messages.sum())
    return (len(transcript) - ones, ones)


def enumerate_parity(p: float, count: int) -> float:
    """``P[sum of count i.i.d. Ber(p) is odd]`` by summing over all
    ``2^count`` outcomes."""
    if count == 0:
        return 0.0
    idx = np.arange(1 << count, dtype=np.int64)
    bits = (idx[:, None] >> np.arange(count)) & 1
    probs = np.prod(np.where(bits == 1, p, 1.0 - p), axis=1)
    odd = bits.sum(axis=1) % 2 == 1
    return math.fsum(probs[odd])


def exact_joint_zsum(stream: Sequence[int], lam: int, t: int, cap: int = DEFAULT_OUTCOME_CAP) -> EmpiricalDist:
    """Exact law of ``(I_t, output)`` for the noisy binary-sum counter.

    ``I_t = I_0 + x_1 + ... + x_t`` and ``output = I_n + eta`` with ``I_0`` and
    ``eta`` independent ``Bin(lam, 1/2)``.
    """
    stream = [int(b) for b in stream]
    if not 0 <= t <= len(stream):
        raise ParameterError(f"intrusion time {t} outside [0, {len(stream)}]")
    if (lam + 1) ** 2 > cap:
        raise OutcomeSpaceError(f"support of size {(lam + 1) ** 2} exceeds cap {cap}")
    prefix, total = sum(stream[:t]), sum(stream)
    pmf = stats.binom.pmf(np.arange(lam + 1), lam, 0.5)
    # (I_0, eta) = (a, b) maps one-to-one onto (a + prefix, a + total + b)
    joint = np.outer(pmf, pmf)
    a, b = np.nonzero(joint)
    probs = {(int(i) + prefix, int(i) + total + int(j)): float(joint[i, j]) for i, j in zip(a, b)}
    return EmpiricalDist.exact(probs, encoding="zsum-joint")
