"""Closed-form identities and inequalities checked against independent oracles."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Optional

import numpy as np
import sympy
from scipy import stats

from ..audit import enumerate_parity
from ..distinct import parity_bias, per_user_rate
from ..sampling import RandomSource, binomial_privacy_ok, noise_ratio_sq, poisson
from ..uniformity import moment_oracle, ut_decompose


@dataclass(frozen=True)
class LemmaResult:
    name: str
    passed: bool
    detail: str
    checks: int = 1


def check_parity_bias(max_n: int = 16, probs=(0.0, 0.1, 0.25, 0.5), tol: float = 1e-12) -> LemmaResult:
    """Parity of ``gamma n`` draws of ``Ber(p')`` against ``(1-(1-2p)^gamma)/2``,
    by enumerating every outcome."""
    worst, count = 0.0, 0
    for n in range(1, max_n + 1):
        for honest in range(1, n + 1):
            gamma = honest / n
            for p in probs:
                enumerated = enumerate_parity(per_user_rate(p, n), honest)
                worst = max(worst, abs(enumerated - parity_bias(p, gamma)))
                count += 1
    return LemmaResult("parity-bias", worst <= tol, f"max abs diff {worst:.3e} over {count} cases", count)


def check_gamma_inequality(points: int = 10_000, digits: int = 40) -> LemmaResult:
    """``2^g / (2^g - 1) <= 2/g`` on a grid of ``g`` in ``(0, 1]``, evaluated to
    ``digits`` significant digits."""
    failures, worst = 0, -math.inf
    for i in range(1, points + 1):
        g = sympy.Rational(i, points)
        lhs = sympy.Pow(2, g) / (sympy.Pow(2, g) - 1)
        gap = sympy.N(lhs - 2 / g, digits)
        worst = max(worst, float(gap))
        if gap > 0:
            failures += 1
    return LemmaResult("gamma-inequality", failures == 0, f"{failures} violations, max lhs-rhs {worst:.3e}", points)


def poisson_tail_bound(lam: float, t: float) -> float:
    return 2.0 * math.exp(-(t**2) / (2.0 * (lam + t)))


def check_poisson_tail(lams=(0.5, 1, 5, 20, 100, 500), fracs=(0.1, 0.25, 0.5, 1, 2, 4),
                       samples: int = 0, rng: Optional[RandomSource] = None) -> LemmaResult:
    """Exact two-sided Poisson tails never exceed the concentration bound; with
    ``samples > 0`` the sampler's empirical tails are held to bound + 3 SE."""
    failures, count = 0, 0
    for lam in lams:
        for f in fracs:
            t = f * max(lam, 1.0)
            # P[X >= lam + t] + P[X <= lam - t]
            upper = stats.poisson.sf(math.ceil(lam + t) - 1, lam)
            lower = stats.poisson.cdf(math.floor(lam - t), lam) if lam - t >= 0 else 0.0
            bound = poisson_tail_bound(lam, t)
            count += 1
            if upper + lower > bound:
                failures += 1
            if samples and rng is not None:
                x = poisson(lam, rng.child(f"{lam}-{f}"), size=samples)
                freq = float(np.mean(np.abs(x - lam) >= t))
                se = math.sqrt(max(freq * (1 - freq), 1.0 / samples) / samples)
                count += 1
                if freq > bound + 3 * se:
                    failures += 1
    return LemmaResult("poisson-tail", failures == 0, f"{failures} violations in {count} checks", count)


def binomial_threshold(p: float, eps: float, delta: float) -> int:
    """Smallest ``l`` with ``l min(p, 1-p) >= 10 coth(eps/2)^2 ln(2/delta)``."""
    need = 10.0 * noise_ratio_sq(eps) * math.log(2.0 / delta) / min(p, 1.0 - p)
    return math.ceil(need)


def check_binomial_threshold(grid: Optional[Iterable[tuple[float, float, float]]] = None) -> LemmaResult:
    grid = list(grid) if grid is not None else [
        (p, eps, delta) for p in (0.5, 0.3, 0.1) for eps in (0.25, 0.5, 1.0, 2.0) for delta in (1e-2, 1e-6)
    ]
    failures = 0
    for p, eps, delta in grid:
        l_star = binomial_threshold(p, eps, delta)
        if not binomial_privacy_ok(l_star, p, eps, delta) or binomial_privacy_ok(l_star - 1, p, eps, delta):
            failures += 1
    return LemmaResult("binomial-threshold", failures == 0, f"{failures} non-flipping thresholds of {len(grid)}", len(grid))


def simulate_moments(lambdas, deviations, m: float, trials: int, rng: RandomSource):
    """Draws of ``(A, B, C)`` for fixed noise scales and fixed ``c_j - m/k``."""
    ell = np.asarray(lambdas, dtype=np.int64)
    d = np.asarray(deviations, dtype=float)
    k = ell.size
    errors = rng.gen.binomial(ell, 0.5, size=(trials, k)) - ell / 2.0
    counts = np.broadcast_to(d + m / k, (trials, k))
    _, a, b, c = ut_decompose(counts, errors, m)
    return a, b, c


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def _var_se(x: np.ndarray) -> tuple[float, float]:
    # standard error of the sample variance from the fourth central moment
    c = x - x.mean()
    v = float((c**2).mean())
    m4 = float((c**4).mean())
    return float(x.var(ddof=1)), math.sqrt(max(m4 - v * v, 0.0) / x.size)


def check_moments(k: int = 10, m: float = 2000, trials: int = 100_000, rng: Optional[RandomSource] = None,
                  sigmas: float = 3.0) -> LemmaResult:
    """Monte Carlo moments of ``A, B, C`` against their closed forms."""
    rng = rng if rng is not None else RandomSource(0)
    ell = rng.child("scales").gen.poisson(30, size=k)
    d = rng.child("deviations").gen.normal(0.0, math.sqrt(m / k), size=k)
    a, b, c = simulate_moments(ell, d, m, trials, rng.child("draws"))
    ea, var_a_bound, var_c = moment_oracle(ell, m, k)
    checks = []
    mean_a, se_a = _mean_se(a)
    checks.append(("E[A]", abs(mean_a - ea) <= sigmas * se_a))
    va, se_va = _var_se(a)
    checks.append(("Var[A]", va <= var_a_bound + sigmas * se_va))
    mean_b, se_b = _mean_se(b)
    checks.append(("E[B]", abs(mean_b) <= sigmas * se_b))
    mean_c, se_c = _mean_se(c)
    checks.append(("E[C]", abs(mean_c) <= sigmas * se_c))
    vc, se_vc = _var_se(c)
    checks.append(("Var[C]", abs(vc - var_c) <= sigmas * se_vc))
    pos = float(np.mean(b >= 0))
    checks.append(("P[B>=0]", abs(pos - 0.5) <= sigmas * math.sqrt(0.25 / trials)))
    failed = [name for name, ok in checks if not ok]
    detail = "all moments within tolerance" if not failed else "failed: " + ", ".join(failed)
    return LemmaResult("moments", not failed, detail, len(checks))


def exact_b_law(lambdas, deviations, m: int) -> dict:
    """Exact law of ``B = (2k/m) sum_j E_j d_j`` with rational arithmetic,
    ``E_j = Bin(l_j, 1/2) - l_j/2``."""
    k = len(lambdas)
    law = {Fraction(0): Fraction(1)}
    for ell, d in zip(lambdas, deviations):
        step = {}
        for ones in range(ell + 1):
            p = Fraction(math.comb(ell, ones), 2**ell)
            e = Fraction(ones) - Fraction(ell, 2)
            value = Fraction(2 * k, m) * e * Fraction(d)
            step[value] = step.get(value, 0) + p
        nxt = {}
        for v, p in law.items():
            for w, q in step.items():
                nxt[v + w] = nxt.get(v + w, 0) + p * q
        law = nxt
    return law


def check_b_symmetry(max_ell: int = 4, deviations=(Fraction(3), Fraction(-7, 2)), m: int = 20) -> LemmaResult:
    failures, count = 0, 0
    for l1 in range(max_ell + 1):
        for l2 in range(max_ell + 1):
            law = exact_b_law((l1, l2), deviations, m)
            count += 1
            if any(law.get(-v, 0) != p for v, p in law.items()):
                failures += 1
    return LemmaResult("b-symmetry", failures == 0, f"{failures} asymmetric laws of {count}", count)


LEMMAS: dict[str, Callable[..., LemmaResult]] = {
    "parity-bias": check_parity_bias,
    "gamma-inequality": check_gamma_inequality,
    "poisson-tail": check_poisson_tail,
    "binomial-threshold": check_binomial_threshold,
    "moments": check_moments,
    "b-symmetry": check_b_symmetry,
}


def lemma_suite(selection: Optional[Iterable[str]] = None, rng: Optional[RandomSource] = None) -> list[LemmaResult]:
    """Run the selected checks (all by default; an empty selection runs none)."""
    names = list(LEMMAS) if selection is None else list(selection)
    unknown = [n for n in names if n not in LEMMAS]
    if unknown:
        raise KeyError(f"unknown lemma checks: {unknown}")
    rng = rng if rng is not None else RandomSource(0)
    out = []
    for name in names:
        if name == "moments":
            out.append(check_moments(rng=rng.child("moments")))
        elif name == "poisson-tail":
            out.append(check_poisson_tail(samples=20_000, rng=rng.child("poisson")))
        else:
            out.append(LEMMAS[name]())
    return out
