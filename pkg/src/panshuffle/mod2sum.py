"""Split-and-mix parity: each user sends additive one-bit shares of its bit,
and the shuffled union reveals only the total parity."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .audit import MonteCarloEstimate, tv_distance, EmpiricalDist
from .sampling import ParameterError, RandomSource, as_source


@dataclass(frozen=True)
class ParityShares:
    shares: np.ndarray

    def parity(self) -> int:
        return int(self.shares.sum() % 2)

    def __len__(self) -> int:
        return int(self.shares.size)


def share_count(sigma: float, n: int) -> int:
    """Shares per user: ``ceil(sigma) + ceil(log2(max(n, 2))) + 1``."""
    if not sigma > 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    if n < 1:
        raise ParameterError(f"n must be at least 1, got {n}")
    return math.ceil(sigma) + math.ceil(math.log2(max(n, 2))) + 1


def mod2_randomize(bit: int, sigma: float, n: int, rng: RandomSource) -> ParityShares:
    if bit not in (0, 1):
        raise ParameterError(f"bit must be 0 or 1, got {bit}")
    m = share_count(sigma, n)
    free = rng.gen.integers(0, 2, size=m - 1, dtype=np.int64)
    last = (bit + free.sum()) % 2
    return ParityShares(np.append(free, last))


def mod2_share_matrix(bits: np.ndarray, m: int, rng: RandomSource) -> np.ndarray:
    """Vectorized shares: row ``i`` holds the ``m`` shares of ``bits[i]``."""
    bits = np.asarray(bits, dtype=np.int64)
    shares = rng.gen.integers(0, 2, size=bits.shape + (m,), dtype=np.int64)
    shares[..., -1] = (bits + shares[..., :-1].sum(axis=-1)) % 2
    return shares


def mod2_analyze(all_shares) -> int:
    bits = np.asarray(all_shares, dtype=np.int64)
    return int(bits.sum() % 2) if bits.size else 0


def enumerate_shares(bit: int, m: int) -> list[tuple[int, ...]]:
    """All ``2^(m-1)`` equally likely share vectors for ``bit``."""
    out = []
    for free in itertools.product((0, 1), repeat=m - 1):
        out.append(free + ((bit + sum(free)) % 2,))
    return out


def _weight_law(parity: int, m: int) -> np.ndarray:
    # number of ones in a uniform length-m vector of the given parity
    law = np.zeros(m + 1)
    for w in range(parity, m + 1, 2):
        law[w] = math.comb(m, w)
    return law / law.sum()


def pool_weight_law(bits: Sequence[int], m: int) -> np.ndarray:
    """Exact law of the number of ones in the shuffled share pool.

    A shuffled pool of unlabeled bits is determined by its count of ones, so
    this is the full output distribution of the honest users' shuffler view.
    """
    law = np.array([1.0])
    for b in bits:
        law = np.convolve(law, _weight_law(int(b), m))
    return law


def collapsed_input(h: Sequence[int]) -> list[int]:
    h = list(h)
    return [sum(h) % 2] + [0] * (len(h) - 1)


def mod2_exact_tv(h: Sequence[int], sigma: float, n: Optional[int] = None) -> float:
    """Exact TV between shuffled shares of ``h`` and of its collapsed vector."""
    n = len(h) if n is None else n
    m = share_count(sigma, n)
    p = pool_weight_law(h, m)
    q = pool_weight_law(collapsed_input(h), m)
    return 0.5 * float(np.abs(p - q).sum())


def _pool_weights(bits: Sequence[int], m: int, trials: int, rng: RandomSource) -> np.ndarray:
    shares = mod2_share_matrix(np.broadcast_to(np.asarray(bits), (trials, len(bits))), m, rng)
    return shares.sum(axis=(1, 2))


def mod2_security_probe(
    n_honest: int,
    sigma: float,
    trials: int,
    rng: RandomSource,
    h: Optional[Sequence[int]] = None,
    n: Optional[int] = None,
    confidence: float = 0.99,
    chunk: int = 200_000,
) -> MonteCarloEstimate:
    """Monte Carlo TV between the honest share pool of ``h`` and that of the
    collapsed vector ``(sum(h) mod 2, 0, ..., 0)``.

    ``h`` defaults to the alternating vector ``(1, 0, 1, 0, ...)``. The
    randomizers are parameterized by the full population ``n`` (default
    ``n_honest``), as in a drop-out run.
    """
    if n_honest < 2:
        raise ParameterError("the parity guarantee needs at least two honest users")
    rng = as_source(rng)
    h = [i % 2 == 0 for i in range(n_honest)] if h is None else list(h)
    if len(h) != n_honest:
        raise ParameterError("h must hold one bit per honest user")
    h = [int(b) for b in h]
    m = share_count(sigma, n_honest if n is None else n)
    w = collapsed_input(h)
    size = n_honest * m + 1
    counts_h = np.zeros(size, dtype=np.int64)
    counts_w = np.zeros(size, dtype=np.int64)
    done = 0
    src_h, src_w = rng.child("honest"), rng.child("collapsed")
    while done < trials:
        batch = min(chunk, trials - done)
        counts_h += np.bincount(_pool_weights(h, m, batch, src_h), minlength=size)
        counts_w += np.bincount(_pool_weights(w, m, batch, src_w), minlength=size)
        done += batch
    p = EmpiricalDist.from_counts(dict(enumerate(counts_h)), encoding="pool-weight")
    q = EmpiricalDist.from_counts(dict(enumerate(counts_w)), encoding="pool-weight")
    hw = p.half_width(confidence / 2 + 0.5) + q.half_width(confidence / 2 + 0.5)
    # the honest pool and the collapsed pool are resampled independently
    return MonteCarloEstimate(value=tv_distance(p, q), half_width=hw, trials=trials)
