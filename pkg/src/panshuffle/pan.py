"""Pan-private streaming: online algorithms with an exposable internal state,
the noisy binary-sum counter, the histogram built from it, and the two
transformations that turn a robustly shuffle-private protocol into a
pan-private online algorithm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .distinct import DE_PROTOCOL, DeParams
from .sampling import ParameterError, RandomSource, check_privacy, noise_ratio_sq
from .shuffle import ProtocolSpec, Transcript, shuffle
from .uniformity import UT_PROTOCOL, UtParams


class StreamError(ValueError):
    """A stream element outside the algorithm's domain."""


@dataclass(frozen=True)
class PanState:
    """Immutable copy of an internal state after ``t`` stream elements."""

    t: int
    value: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.array(self.value, copy=True)
        v.setflags(write=False)
        object.__setattr__(self, "value", v)
        object.__setattr__(self, "meta", dict(self.meta))


class OnlineAlgorithm:
    """``Q = (Q_I, Q_O)``: a randomized state update and a randomized output.

    Subclasses implement ``init``, ``update`` and ``output``. ``update_many``
    may be overridden by a vectorized equivalent; it must match calling
    ``update`` element by element in distribution.
    """

    def init(self, rng: RandomSource) -> Any:
        raise NotImplementedError

    def update(self, state: Any, x, rng: RandomSource) -> Any:
        raise NotImplementedError

    def update_many(self, state: Any, xs: Sequence, rng: RandomSource) -> Any:
        for x in xs:
            state = self.update(state, x, rng)
        return state

    def output(self, state: Any, rng: RandomSource) -> Any:
        raise NotImplementedError

    def snapshot(self, state: Any, t: int) -> PanState:
        return PanState(t, np.asarray(state))

    def check_stream(self, stream: Sequence) -> None:
        pass


@dataclass(frozen=True)
class PanRun:
    output: Any
    length: int
    snapshots: dict
    meta: dict = field(default_factory=dict)


def run_online(algorithm: OnlineAlgorithm, stream: Sequence, rng: RandomSource,
               snapshot_times: Sequence[int] = ()) -> PanRun:
    """Feed ``stream`` through ``algorithm``, copying the state out at each
    requested time. Taking a snapshot consumes no randomness, so it cannot
    change the run."""
    stream = list(stream)
    algorithm.check_stream(stream)
    times = sorted(set(int(t) for t in snapshot_times))
    for t in times:
        if not 0 <= t <= len(stream):
            raise ParameterError(f"intrusion time {t} outside [0, {len(stream)}]")
    state = algorithm.init(rng)
    snaps = {}
    pos = 0
    for t in times:
        state = algorithm.update_many(state, stream[pos:t], rng)
        pos = t
        snaps[t] = algorithm.snapshot(state, t)
    state = algorithm.update_many(state, stream[pos:], rng)
    final = algorithm.snapshot(state, len(stream))
    out = algorithm.output(state, rng)
    return PanRun(output=out, length=len(stream), snapshots=snaps, meta=dict(final.meta))


def intrusion_view(run: PanRun, t: int) -> tuple[PanState, Any]:
    """The pair an intruder at time ``t`` learns: the state ``I_t`` and the
    final output."""
    if not 0 <= t <= run.length:
        raise ParameterError(f"intrusion time {t} outside [0, {run.length}]")
    if t not in run.snapshots:
        raise ParameterError(f"no snapshot was taken at time {t}")
    return run.snapshots[t], run.output


# ------------------------------------------------------------ zero-sum


def zsum_lambda(eps: float, delta: float) -> int:
    """``ceil(20 ((e^eps+1)/(e^eps-1))^2 ln(2/delta))``."""
    check_privacy(eps, delta)
    return math.ceil(20.0 * noise_ratio_sq(eps) * math.log(2.0 / delta))


def _check_lambda(lam) -> int:
    if lam < 0 or int(lam) != lam:
        raise ParameterError(f"lambda must be a non-negative integer, got {lam}")
    return int(lam)


class QZsum(OnlineAlgorithm):
    """Noisy binary-sum counter: start at ``Bin(lam, 1/2)``, add each bit,
    and add a fresh ``Bin(lam, 1/2)`` before answering."""

    def __init__(self, lam: int):
        self.lam = _check_lambda(lam)

    def check_stream(self, stream):
        if any(b not in (0, 1) for b in stream):
            raise StreamError("the binary-sum counter takes a stream of bits")

    def init(self, rng):
        return int(rng.gen.binomial(self.lam, 0.5))

    def update(self, state, x, rng):
        return state + int(x)

    def update_many(self, state, xs, rng):
        return state + int(sum(int(x) for x in xs))

    def output(self, state, rng):
        return state + int(rng.gen.binomial(self.lam, 0.5))


def zsum_run(stream: Sequence[int], lam: int, rng: RandomSource) -> int:
    """Raw counter output; always within ``[0, 2 lam]`` above the true sum."""
    return run_online(QZsum(lam), stream, rng).output


def debias(raw, lam: int):
    return np.asarray(raw) - lam if np.ndim(raw) else raw - lam


class PanHistogram(OnlineAlgorithm):
    """One noisy counter per domain element."""

    def __init__(self, k: int, lam: int):
        if k < 1:
            raise ParameterError("k must be positive")
        self.k = k
        self.lam = _check_lambda(lam)

    def check_stream(self, stream):
        xs = np.asarray(stream, dtype=np.int64)
        if xs.size and (xs.min() < 1 or xs.max() > self.k):
            raise StreamError(f"stream elements outside [1, {self.k}]")

    def init(self, rng):
        return rng.gen.binomial(self.lam, 0.5, size=self.k).astype(np.int64)

    def update(self, state, x, rng):
        state = state.copy()
        state[int(x) - 1] += 1
        return state

    def update_many(self, state, xs, rng):
        xs = np.asarray(xs, dtype=np.int64)
        return state + np.bincount(xs - 1, minlength=self.k) if xs.size else state.copy()

    def output(self, state, rng):
        return state + rng.gen.binomial(self.lam, 0.5, size=self.k)


@dataclass(frozen=True)
class HistogramResult:
    raw: np.ndarray
    debiased: np.ndarray


def pan_histogram(stream: Sequence[int], k: int, lam: int, rng: RandomSource) -> HistogramResult:
    raw = run_online(PanHistogram(k, lam), stream, rng).output
    return HistogramResult(raw=raw, debiased=raw - lam)


# ------------------------------------------------ shuffle -> pan transforms


class ShuffleToPan(OnlineAlgorithm):
    """Generic transformation over a shuffle protocol built for ``3L`` users.

    The state is the pool of messages received so far. It is kept as an
    unordered multiset and shuffled once at output time; on an exchangeable
    pool that is the same as shuffling at every step.
    """

    def __init__(self, spec: ProtocolSpec, params, length: int):
        if length < 1:
            raise ParameterError("stream length must be positive")
        self.spec = spec
        self.params = params
        self.length = length
        self.n = 3 * length

    def _randomize(self, xs, rng) -> np.ndarray:
        return self.spec.randomize_all(list(xs), self.n, self.params, rng)

    def _leading(self, rng) -> Sequence:
        raise NotImplementedError

    def _trailing(self, rng) -> Sequence:
        raise NotImplementedError

    def init(self, rng):
        self._t = 0
        # one lineage for all randomizer calls; child() is deterministic per id
        self._proto = rng.child("protocol")
        return self._randomize(self._leading(rng), self._proto)

    def _route(self, xs, rng) -> Sequence:
        return xs

    def update(self, state, x, rng):
        return self.update_many(state, [x], rng)

    def update_many(self, state, xs, rng):
        if len(xs) == 0:
            return state
        routed = self._route(list(xs), rng)
        self._t += len(xs)
        return np.concatenate([state, self._randomize(routed, self._proto)])

    def snapshot(self, state, t):
        # an intruder sees a shuffled pool: expose it in sorted (canonical) order
        order = np.lexsort(state.T[::-1]) if state.ndim == 2 else np.argsort(state, kind="stable")
        return PanState(t, state[order], self._meta())

    def _meta(self) -> dict:
        return {}

    def output(self, state, rng):
        pool = np.concatenate([state, self._randomize(self._trailing(rng), self._proto)])
        transcript = shuffle([pool], rng.child("shuffler"), participant_count=self.n)
        return self.spec.analyzer(transcript, self.n, self.params)

    def check_stream(self, stream):
        if len(stream) != self.length:
            raise StreamError(f"built for streams of length {self.length}, got {len(stream)}")


class ShuffleToPanDE(ShuffleToPan):
    """Pads the stream with ``L`` copies of element 1 on each side."""

    def __init__(self, params: DeParams, length: int, spec: ProtocolSpec = DE_PROTOCOL):
        if params.n != 3 * length:
            raise ParameterError(f"protocol must be built for n = 3L = {3 * length} users")
        super().__init__(spec, params, length)

    def check_stream(self, stream):
        super().check_stream(stream)
        xs = np.asarray(stream, dtype=np.int64)
        if xs.min() < 1 or xs.max() > self.params.k:
            raise StreamError(f"stream elements outside [1, {self.params.k}]")

    def _leading(self, rng):
        return [1] * self.length

    _trailing = _leading


def padded_input(stream: Sequence[int]) -> list[int]:
    """The ``3L``-user input whose protocol run the DE transformation mimics."""
    pad = [1] * len(stream)
    return pad + [int(x) for x in stream] + pad


def pan_from_shuffle_de(stream: Sequence[int], params: DeParams, rng: RandomSource,
                        snapshot_times: Sequence[int] = ()) -> PanRun:
    return run_online(ShuffleToPanDE(params, len(stream)), stream, rng, snapshot_times)


class ShuffleToPanUT(ShuffleToPan):
    """Surrounds the stream with ``L`` uniform dummies on each side and keeps
    only the first ``n' = min(Bin(3L, 2/9), L)`` stream elements, replacing
    the rest with uniform dummies."""

    def __init__(self, params: UtParams, length: int, spec: ProtocolSpec = UT_PROTOCOL):
        if params.n != 3 * length:
            raise ParameterError(f"protocol must be built for n = 3L = {3 * length} users")
        super().__init__(spec, params, length)

    def check_stream(self, stream):
        super().check_stream(stream)
        xs = np.asarray(stream, dtype=np.int64)
        if xs.min() < 1 or xs.max() > self.params.k:
            raise StreamError(f"stream elements outside [1, {self.params.k}]")

    def _uniform(self, count, rng):
        return list(rng.gen.integers(1, self.params.k + 1, size=count))

    def init(self, rng):
        self._dummies = rng.child("dummies")
        self.n_prime = min(int(rng.child("mixture").gen.binomial(self.n, 2.0 / 9.0)), self.length)
        self._real = 0
        return super().init(rng)

    def _leading(self, rng):
        return self._uniform(self.length, self._dummies)

    _trailing = _leading

    def _route(self, xs, rng):
        keep = max(0, min(len(xs), self.n_prime - self._t))
        self._real += keep
        return list(xs[:keep]) + self._uniform(len(xs) - keep, self._dummies)

    def _meta(self):
        return {"n_prime": self.n_prime, "real_samples": self._real}


def pan_from_shuffle_ut(stream: Sequence[int], params: UtParams, rng: RandomSource,
                        snapshot_times: Sequence[int] = ()) -> PanRun:
    return run_online(ShuffleToPanUT(params, len(stream)), stream, rng, snapshot_times)


def pool_transcript(state: PanState, participant_count: int) -> Transcript:
    """A snapshot's message pool as a transcript (order is irrelevant)."""
    return Transcript(np.asarray(state.value), participant_count)
