"""Shuffle-model execution: randomizer/analyzer pairs, the uniform shuffler,
honest runs and drop-out runs.

Messages travel as numpy arrays. A labeled message ``(j, b)`` is one row of
an ``(M, 2)`` integer array; label-free protocols use a flat ``(M,)`` bit
array. Analyzers only ever look at per-label counts, so they are
permutation-invariant by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable, NamedTuple, Optional, Sequence

import numpy as np

from .sampling import ParameterError, RandomSource


class MalformedTranscript(ValueError):
    """A transcript carrying labels or payloads the analyzer cannot accept."""


class LabeledMessage(NamedTuple):
    label: int
    payload: int


@dataclass(frozen=True)
class Transcript:
    messages: np.ndarray
    participant_count: int

    @property
    def labeled(self) -> bool:
        return self.messages.ndim == 2

    def __len__(self) -> int:
        return int(self.messages.shape[0])

    def as_messages(self) -> list:
        if self.labeled:
            return [LabeledMessage(int(a), int(b)) for a, b in self.messages]
        return [int(b) for b in self.messages]

    def label_counts(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Per-label ``(message count, payload-one count)``, labels 1..k."""
        if not self.labeled:
            raise MalformedTranscript("transcript carries no labels")
        if len(self) == 0:
            z = np.zeros(k, dtype=np.int64)
            return z, z.copy()
        labels = self.messages[:, 0]
        payload = self.messages[:, 1]
        if labels.min() < 1 or labels.max() > k:
            raise MalformedTranscript(f"labels outside [1, {k}]")
        if payload.min() < 0 or payload.max() > 1:
            raise MalformedTranscript("payloads must be bits")
        totals = np.bincount(labels - 1, minlength=k)
        ones = np.bincount(labels - 1, weights=payload, minlength=k).astype(np.int64)
        return totals, ones

    def pool(self, label: int) -> np.ndarray:
        """Payload bits carried under one label."""
        return self.messages[self.messages[:, 0] == label, 1]


Randomizer = Callable[[Any, int, Any, RandomSource], np.ndarray]
BatchRandomizer = Callable[[Sequence, int, Any, RandomSource], np.ndarray]
Analyzer = Callable[[Transcript, int, Any], Any]


@dataclass(frozen=True)
class ProtocolSpec:
    """A shuffle protocol ``(R, A)``.

    ``batch_randomizer`` is an optional vectorized equivalent of calling
    ``randomizer`` once per user and concatenating; it must produce the same
    message multiset in distribution.
    """

    randomizer: Randomizer
    analyzer: Analyzer
    name: str = "protocol"
    batch_randomizer: Optional[BatchRandomizer] = None

    def randomize_all(self, inputs: Sequence, n: int, params, rng: RandomSource) -> np.ndarray:
        if self.batch_randomizer is not None:
            return self.batch_randomizer(inputs, n, params, rng)
        return _concat([self.randomizer(x, n, params, rng) for x in inputs])


def _concat(vectors: Sequence[np.ndarray]) -> np.ndarray:
    vectors = [np.asarray(v) for v in vectors]
    vectors = [v for v in vectors if v.size] or vectors[:1]
    if not vectors:
        return np.zeros((0, 2), dtype=np.int64)
    if vectors[0].ndim == 2:
        return np.concatenate([v.reshape(-1, 2) for v in vectors]).astype(np.int64, copy=False)
    return np.concatenate(vectors).astype(np.int64, copy=False)


def shuffle(message_vectors: Sequence, rng: RandomSource, participant_count: Optional[int] = None) -> Transcript:
    """Concatenate every message vector and apply a uniform permutation."""
    if participant_count is None:
        participant_count = len(message_vectors)
    if len(message_vectors) == 0:
        return Transcript(np.zeros((0, 2), dtype=np.int64), participant_count)
    flat = _concat([np.asarray(v) for v in message_vectors])
    # Generator.permutation is a Fisher-Yates shuffle
    return Transcript(rng.gen.permutation(flat, axis=0), participant_count)


def run_protocol(spec: ProtocolSpec, inputs: Sequence, params, rng: RandomSource):
    """Execute ``A(S(R(x_1), ..., R(x_n)))``."""
    n = len(inputs)
    if n < 1:
        raise ParameterError("at least one user is required")
    messages = spec.randomize_all(inputs, n, params, rng)
    transcript = shuffle([messages], rng, participant_count=n)
    return spec.analyzer(transcript, n, params)


def honest_mask(n: int, gamma: float) -> np.ndarray:
    """Mask with ``floor(gamma * n)`` honest users, the first ones by index."""
    if not 0.0 < gamma <= 1.0:
        raise ParameterError(f"gamma must lie in (0, 1], got {gamma}")
    honest = math.floor(gamma * n + 1e-9)
    mask = np.zeros(n, dtype=bool)
    mask[:honest] = True
    return mask


def run_with_dropout(spec: ProtocolSpec, inputs: Sequence, mask: Sequence[bool], params, rng: RandomSource) -> Transcript:
    """Shuffled transcript of the honest users only.

    Honest randomizers are still told the full population ``n``; that is what
    makes a drop-out attack bite.
    """
    mask = np.asarray(mask, dtype=bool)
    n = len(inputs)
    if mask.shape != (n,):
        raise ParameterError("honest mask must have one entry per user")
    if not mask.any():
        raise ParameterError("at least one honest user is required")
    honest_inputs = [x for x, keep in zip(inputs, mask) if keep]
    messages = spec.randomize_all(honest_inputs, n, params, rng)
    return shuffle([messages], rng, participant_count=int(mask.sum()))
