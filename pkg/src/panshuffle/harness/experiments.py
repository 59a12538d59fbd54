"""Desk-scale experiments. Each experiment validates a grid point, runs it on
its own random stream, and returns result rows; acceptance-tagged rows carry
a threshold and a pass flag."""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..audit import EmpiricalDist, audit_pair, exact_joint_zsum, hockey_stick
from ..distinct import (
    DE_PROTOCOL,
    DeParams,
    de_error_bound,
    de_randomize_batch,
    eps_gamma_bound,
    hde_error_bound,
    hde_run,
)
from ..mod2sum import collapsed_input, enumerate_shares, mod2_analyze, mod2_exact_tv, mod2_security_probe, share_count
from ..pan import PanHistogram, QZsum, run_online, zsum_lambda
from ..sampling import ParameterError, RandomSource, binomial_privacy_eps, check_privacy
from ..shuffle import honest_mask, run_protocol, run_with_dropout
from ..uniformity import (
    COMPRESSION_CONSTANT,
    UT_PROTOCOL,
    FullTestConfig,
    UtParams,
    half_flat,
    uniform_dist,
    ut_rejection_rate,
)
from .calibrate import calibrate_ut
from .config import ExperimentConfig
from .lemmas import lemma_suite

SCHEMA_VERSION = 1
CSV_COLUMNS = ["experiment", "point", "params", "metric", "value", "ci_half_width", "trials", "threshold", "passed"]


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    point: int
    params: dict
    metric: str
    value: float
    half_width: float = 0.0
    trials: int = 0
    threshold: Optional[float] = None
    passed: Optional[bool] = None
    wall_time: float = 0.0

    @property
    def acceptance(self) -> bool:
        return self.passed is not None


@dataclass
class ExperimentResult:
    rows: list = field(default_factory=list)
    errors: list = field(default_factory=list)  # (point index, params, message)

    @property
    def ok(self) -> bool:
        return all(r.passed for r in self.rows if r.acceptance)

    def metric(self, name: str, **match) -> list:
        return [r for r in self.rows if r.metric == name and all(r.params.get(k) == v for k, v in match.items())]


def _sigma_floor(target: float, trials: int) -> float:
    """``target - 3 sigma`` for a success rate whose nominal value is ``target``."""
    return target - 3.0 * math.sqrt(target * (1.0 - target) / trials)


# --------------------------------------------------------------- distinct


def input_vector(kind: str, n: int, k: int) -> list[int]:
    """``all-distinct`` cycles through every element it can (``min(n, k)``
    distinct values); ``half-distinct`` through half as many."""
    if kind == "all-distinct":
        d = min(n, k)
    elif kind == "half-distinct":
        d = max(1, math.ceil(min(n, k) / 2))
    else:
        raise ParameterError(f"unknown input kind {kind!r}")
    return [i % d + 1 for i in range(n)]


def _validate_distinct(p):
    DeParams(int(p["k"]), int(p["n"]), float(p["eps"]), float(p.get("delta", 1e-6)))
    if not 0 < float(p["beta"]) < 1:
        raise ParameterError("beta must lie in (0, 1)")


def run_distinct_accuracy(p: dict, rng: RandomSource, trials: int) -> list:
    k, n, eps, beta = int(p["k"]), int(p["n"]), float(p["eps"]), float(p["beta"])
    params = DeParams(k, n, eps, float(p.get("delta", 1e-6)))
    bound = de_error_bound(k, eps, beta)
    kinds = [p["input"]] if "input" in p else ["all-distinct", "half-distinct"]
    rows = []
    for kind in kinds:
        xs = input_vector(kind, n, k)
        truth = len(set(xs))
        src = rng.child(kind)
        errors = np.array([run_protocol(DE_PROTOCOL, xs, params, src.child(i)) - truth for i in range(trials)])
        rate = float(np.mean(np.abs(errors) <= bound))
        point = dict(p, input=kind)
        rows.append(("within_bound_rate", rate, math.sqrt(rate * (1 - rate) / trials), trials,
                     _sigma_floor(1 - beta, trials), None, point))
        rows.append(("error_bound", bound, 0.0, 0, None, None, point))
        rows.append(("mean_abs_error", float(np.abs(errors).mean()), 0.0, trials, None, None, point))
    return rows


def _validate_hde(p):
    check_privacy(float(p["eps"]), float(p.get("delta", 1e-6)))
    if int(p["n"]) > int(p["k"]):
        raise ParameterError("need n <= k for n distinct inputs")


def run_hde_accuracy(p: dict, rng: RandomSource, trials: int) -> list:
    k, n, eps, beta = int(p["k"]), int(p["n"]), float(p["eps"]), float(p["beta"])
    delta, c = float(p.get("delta", 1e-6)), float(p.get("c", 1.0))
    bound = hde_error_bound(n, c, beta, eps)
    hits = 0
    for i in range(trials):
        src = rng.child(i)
        xs = src.child("inputs").gen.choice(k, size=n, replace=False) + 1
        hits += abs(hde_run(list(xs), k, eps, delta, src.child("protocol"), c=c) - n) <= bound
    rate = hits / trials
    return [
        ("within_bound_rate", rate, math.sqrt(rate * (1 - rate) / trials), trials, _sigma_floor(1 - beta, trials), None, p),
        ("error_bound", bound, 0.0, 0, None, None, p),
    ]


# ------------------------------------------------------------- uniformity


def _validate_ut(p):
    check_privacy(float(p["eps"]), float(p["delta"]))
    if int(p["k"]) % 2:
        raise ParameterError("the far distribution needs an even k")
    if not 0 < float(p["alpha"]) <= 0.5:
        raise ParameterError("alpha must lie in (0, 1/2]")


def run_ut_power(p: dict, rng: RandomSource, trials: int) -> list:
    k, alpha, eps, delta = int(p["k"]), float(p["alpha"]), float(p["eps"]), float(p["delta"])
    reps = int(p.get("R", 19))
    target = float(p.get("target", 2.0 / 3.0))
    # compression constant in alpha-hat; other values give the sensitivity rows
    constant = float(p.get("constant", COMPRESSION_CONSTANT))
    rows = []
    m = int(p.get("m", 0))
    if m <= 0:
        cal = calibrate_ut(k, alpha, eps, delta, target, rng.child("calibrate"),
                           trials=int(p.get("cal_trials", 300)), repetitions=reps,
                           compression_constant=constant)
        m = cal.m_star
        rows.append(("c_m", cal.c_m, 0.0, cal.trials, None, None, p))
    rows.append(("m_star", float(m), 0.0, 0, None, None, p))
    cfg = FullTestConfig(k, alpha, eps, delta, m, repetitions=reps, compression_constant=constant)
    evaluate = rng.child("evaluate")
    accept = 1.0 - ut_rejection_rate(uniform_dist(k), cfg, trials, evaluate.child("uniform"))
    power = ut_rejection_rate(half_flat(k, alpha), cfg, trials, evaluate.child("far"))
    for name, rate in (("uniform_rate", accept), ("far_reject_rate", power)):
        rows.append((name, rate, math.sqrt(rate * (1 - rate) / trials), trials, target, None, p))
    return rows


def c_m_scaling_rows(rows: list) -> list:
    """Ratio of calibrated constants between consecutive domain sizes at
    otherwise equal parameters; the shape term absorbs the k^(2/3) growth,
    so a ratio within a factor 3 of 1 means the scaling holds."""
    groups: dict = {}
    for r in rows:
        if r.metric == "c_m":
            key = tuple(sorted((k, v) for k, v in r.params.items() if k != "k"))
            groups.setdefault(key, []).append(r)
    out = []
    for group in groups.values():
        group.sort(key=lambda r: r.params["k"])
        for a, b in zip(group, group[1:]):
            ratio = b.value / a.value
            params = dict(a.params, k=f"{a.params['k']}/{b.params['k']}")
            out.append(ResultRow("ut-power", -1, params, "c_m_ratio", ratio, 0.0, a.trials,
                                 3.0, 1.0 / 3.0 <= ratio <= 3.0))
    return out


# ------------------------------------------------------------------- pan


def _lam(p) -> int:
    if "lam" in p:
        return int(p["lam"])
    return zsum_lambda(float(p["eps"]), float(p["delta"]))


def _validate_lam(p):
    if "lam" not in p and not ("eps" in p and "delta" in p):
        raise ParameterError("give lam, or eps and delta")
    if _lam(p) < 0:
        raise ParameterError("lam must be non-negative")


def run_zsum_error(p: dict, rng: RandomSource, trials: int) -> list:
    lam, length = _lam(p), int(p.get("L", 50))
    algo = QZsum(lam)
    errors = np.empty(trials, dtype=np.int64)
    for i in range(trials):
        src = rng.child(i)
        stream = list(src.child("stream").gen.integers(0, 2, size=int(src.gen.integers(0, length + 1))))
        errors[i] = run_online(algo, stream, src.child("counter")).output - sum(stream)
    violations = int(np.sum((errors < 0) | (errors > 2 * lam)))
    point = dict(p, lam=lam)
    return [
        ("max_abs_error_raw", float(np.abs(errors).max()), 0.0, trials, 2.0 * lam, None, point),
        ("min_error_raw", float(errors.min()), 0.0, trials, None, None, point),
        ("violations", float(violations), 0.0, trials, 0.0, None, point),
        ("mean_error_debiased", float(errors.mean() - lam), float(errors.std() / math.sqrt(trials)), trials, None, None, point),
    ]


def run_histogram_error(p: dict, rng: RandomSource, trials: int) -> list:
    lam, k, length = _lam(p), int(p.get("k", 10)), int(p.get("L", 100))
    algo = PanHistogram(k, lam)
    linf = np.empty(trials, dtype=np.int64)
    violations = 0
    for i in range(trials):
        src = rng.child(i)
        stream = src.child("stream").gen.integers(1, k + 1, size=int(src.gen.integers(0, length + 1)))
        err = run_online(algo, list(stream), src.child("counters")).output - np.bincount(stream - 1, minlength=k)
        linf[i] = np.abs(err).max()
        violations += bool(np.any(err < 0) or np.any(err > 2 * lam))
    point = dict(p, lam=lam, k=k)
    return [
        ("linf_raw_max", float(linf.max()), 0.0, trials, 2.0 * lam, None, point),
        ("violations", float(violations), 0.0, trials, 0.0, None, point),
    ]


# ------------------------------------------------------------------ audits


def label_parity_laws(xs, honest: int, params: DeParams) -> np.ndarray:
    """Closed-form ``P[label parity = 1]`` among the first ``honest`` users."""
    held = set(int(x) for x in xs[:honest])
    q = (1.0 - (1.0 - 2.0 * params.p_prime) ** honest) / 2.0
    return np.array([0.5 if j in held else q for j in range(1, params.k + 1)])


def changed_labels(xs, ys, honest: int, k: int) -> int:
    """Labels whose honest holder set switches between empty and non-empty."""
    a, b = set(xs[:honest]), set(ys[:honest])
    return sum((j in a) != (j in b) for j in range(1, k + 1))


def de_pool_counts(xs, honest: int, params: DeParams, trials: int, rng: RandomSource,
                   chunk: int = 50_000) -> np.ndarray:
    """Per-label payload-one counts of the honest pool, one row per trial.

    Users of all trials are randomized in one batch; a shuffled pool's
    per-label counts do not depend on message order, so no shuffle is needed.
    """
    out = []
    done = 0
    while done < trials:
        batch = min(chunk, trials - done)
        users = np.tile(np.asarray(xs[:honest], dtype=np.int64), batch)
        rows = de_randomize_batch(users, params, rng)
        bits = rows[:, 1].reshape(batch, honest, params.k, params.shares)
        out.append(bits.sum(axis=(1, 3)))
        done += batch
    return np.concatenate(out)


def _validate_audit_de(p):
    DeParams(int(p["k"]), int(p["n"]), float(p["eps"]), float(p["delta"]))
    if math.floor(float(p["gamma"]) * int(p["n"]) + 1e-9) < 1:
        raise ParameterError("gamma n must be at least 1")


def run_audit_de(p: dict, rng: RandomSource, trials: int) -> list:
    k, n, eps, delta, gamma = int(p["k"]), int(p["n"]), float(p["eps"]), float(p["delta"]), float(p["gamma"])
    params = DeParams(k, n, eps, delta)
    honest = int(honest_mask(n, gamma).sum())
    eps_prime = eps_gamma_bound(eps, gamma).exact
    xs = [1] * n
    ys = [2] + [1] * (n - 1)
    # closed-form per-label laws on neighbors: ratios must sit inside e^{+-eps'}
    px, py = label_parity_laws(xs, honest, params), label_parity_laws(ys, honest, params)
    ratios = np.concatenate([px / py, (1 - px) / (1 - py)])
    excess = float(max(ratios.max() - math.exp(eps_prime), math.exp(-eps_prime) - ratios.min(), 0.0))
    eps_test = eps_prime * max(1, changed_labels(xs, ys, honest, k))
    P = EmpiricalDist.from_samples(de_pool_counts(xs, honest, params, trials, rng.child("x")), encoding="de-pool")
    Q = EmpiricalDist.from_samples(de_pool_counts(ys, honest, params, trials, rng.child("y")), encoding="de-pool")
    report = audit_pair(P, Q, eps_test)
    point = dict(p, honest=honest)
    return [
        ("parity_ratio_excess", excess, 0.0, 0, 1e-12, None, point),
        ("eps_prime", eps_prime, 0.0, 0, None, None, point),
        ("eps_tested", eps_test, 0.0, 0, None, None, point),
        ("delta_hat", report.delta_hat, report.delta_half_width, trials, None, None, point),
        ("delta_hat_upper", report.delta_upper, 0.0, trials, 4.0 * delta / gamma, None, point),
    ]


def _validate_audit_ut(p):
    check_privacy(float(p["eps"]), float(p["delta"]))


def ut_label_pool(xs, params: UtParams, gamma: float, label: int, rng: RandomSource) -> tuple:
    t = run_with_dropout(UT_PROTOCOL, xs, honest_mask(len(xs), gamma), params, rng)
    totals, ones = t.label_counts(params.k)
    return int(totals[label - 1] - ones[label - 1]), int(ones[label - 1])


def run_audit_ut(p: dict, rng: RandomSource, trials: int) -> list:
    k, n, eps, delta, gamma = int(p.get("k", 2)), int(p["n"]), float(p["eps"]), float(p["delta"]), float(p["gamma"])
    params = UtParams.build(k, n, n, float(p.get("alpha", 0.5)), eps, delta)
    xs = [1] * n
    ys = [2] + [1] * (n - 1)
    rows = []
    worst = None
    for label in (1, 2):
        src = rng.child(f"label-{label}")
        P = EmpiricalDist.from_samples(
            np.array([ut_label_pool(xs, params, gamma, label, src.child(f"x{i}")) for i in range(trials)]), "ut-pool")
        Q = EmpiricalDist.from_samples(
            np.array([ut_label_pool(ys, params, gamma, label, src.child(f"y{i}")) for i in range(trials)]), "ut-pool")
        report = audit_pair(P, Q, eps)
        if worst is None or report.delta_upper > worst.delta_upper:
            worst = report
    rows.append(("delta_hat", worst.delta_hat, worst.delta_half_width, trials, None, None, p))
    rows.append(("delta_hat_upper", worst.delta_upper, 0.0, trials, 8.0 * delta**gamma, None, p))
    return rows


def zsum_neighbors(max_len: int, rng: RandomSource, random_pairs: int = 64) -> list:
    """Neighboring bit streams: every stream up to length 4 with each single
    flip, plus random streams up to ``max_len``."""
    pairs = []
    for length in range(1, min(max_len, 4) + 1):
        for code in range(2**length):
            x = [(code >> i) & 1 for i in range(length)]
            for pos in range(length):
                y = list(x)
                y[pos] ^= 1
                pairs.append((x, y))
    for _ in range(random_pairs if max_len > 4 else 0):
        length = int(rng.gen.integers(5, max_len + 1))
        x = [int(b) for b in rng.gen.integers(0, 2, size=length)]
        y = list(x)
        y[int(rng.gen.integers(0, length))] ^= 1
        pairs.append((x, y))
    return pairs


def max_zsum_delta(lam: int, eps: float, pairs: list) -> float:
    """Largest exact hockey-stick divergence over pairs and intrusion times."""
    # the joint law depends on a stream only through (prefix sum, total sum)
    laws: dict = {}
    divergences: dict = {}

    def law(stream, t):
        key = (sum(stream[:t]), sum(stream))
        if key not in laws:
            laws[key] = exact_joint_zsum(stream, lam, t)
        return key, laws[key]

    worst = 0.0
    for x, y in pairs:
        for t in range(len(x) + 1):
            (kx, P), (ky, Q) = law(x, t), law(y, t)
            if (kx, ky) not in divergences:
                divergences[kx, ky] = max(hockey_stick(P, Q, eps), hockey_stick(Q, P, eps))
            worst = max(worst, divergences[kx, ky])
    return worst


def _validate_audit_zsum(p):
    check_privacy(1.0, float(p["delta"]))
    if int(p["lam"]) < 0 or int(p.get("L", 8)) < 1:
        raise ParameterError("need lam >= 0 and L >= 1")


def run_audit_zsum(p: dict, rng: RandomSource, trials: int) -> list:
    lam, delta, length = int(p["lam"]), float(p["delta"]), int(p.get("L", 8))
    eps = float(p["eps"]) if "eps" in p else binomial_privacy_eps(lam, 0.5, delta)
    pairs = zsum_neighbors(length, rng)
    worst = max_zsum_delta(lam, eps, pairs)
    point = dict(p, eps_tested=eps)
    return [
        ("delta_hat_exact", worst, 0.0, 0, 1e-12 if "eps" not in p else delta, None, point),
        ("neighbor_pairs", float(len(pairs)), 0.0, 0, None, None, point),
    ]


def mod2_exhaustive_failures(max_n: int = 4, max_sigma: int = 4) -> int:
    """Every input vector, every share vector of every user: the analyzer
    must return the parity of the inputs."""
    failures = 0
    for n in range(1, max_n + 1):
        for sigma in range(1, max_sigma + 1):
            m = share_count(sigma, n)
            shares = {b: enumerate_shares(b, m) for b in (0, 1)}
            weights = {b: np.array([sum(v) for v in shares[b]], dtype=np.int8) for b in (0, 1)}
            for code in range(2**n):
                bits = [(code >> i) & 1 for i in range(n)]
                total = np.zeros(1, dtype=np.int8)
                for b in bits:
                    total = (total[:, None] + weights[b][None, :]).ravel()
                failures += int(np.sum(total % 2 != sum(bits) % 2))
                # spot the analyzer itself on the concatenated share vectors
                vectors = [shares[b][(code * 7 + i) % 2 ** (m - 1)] for i, b in enumerate(bits)]
                failures += mod2_analyze(np.concatenate(vectors)) != sum(bits) % 2
    return failures


def _validate_mod2(p):
    if int(p["n"]) < 2 or float(p["sigma"]) <= 0:
        raise ParameterError("need n >= 2 and sigma > 0")


def parse_bits(text, n: int) -> list:
    if text is None:
        return [1] * n
    bits = [int(c) for c in str(text) if c in "01"]
    if len(bits) != n:
        raise ParameterError(f"h must have {n} bits")
    return bits


def run_mod2_security(p: dict, rng: RandomSource, trials: int) -> list:
    n, sigma = int(p["n"]), float(p["sigma"])
    h = parse_bits(p.get("h"), n)
    est = mod2_security_probe(n, sigma, trials, rng, h=h)
    bound = 2.0**-sigma
    return [
        ("exhaustive_failures", float(mod2_exhaustive_failures()), 0.0, 0, 0.0, None, p),
        ("tv_hat", est.value, est.half_width, trials, None, None, p),
        ("tv_excess_over_ci", est.value - est.half_width, 0.0, trials, bound, None, p),
        ("tv_exact", mod2_exact_tv(h, sigma), 0.0, 0, None, None, p),
        ("collapsed_differs", float(collapsed_input(h) != h), 0.0, 0, None, None, p),
    ]


def run_lemma_suite(p: dict, rng: RandomSource, trials: int) -> list:
    selection = p.get("select")
    selection = None if selection is None else [s for s in str(selection).split("+") if s]
    return [
        (f"lemma:{r.name}", float(r.passed), 0.0, r.checks, 1.0, None, dict(p, detail=r.detail))
        for r in lemma_suite(selection, rng)
    ]


@dataclass(frozen=True)
class Experiment:
    run: Callable
    validate: Callable
    defaults: list
    trials: int


EXPERIMENT_TABLE: dict = {
    "distinct-accuracy": Experiment(run_distinct_accuracy, _validate_distinct, [
        dict(k=10, n=50, eps=1.0, beta=0.1),
        dict(k=50, n=200, eps=1.0, beta=0.1),
        dict(k=50, n=200, eps=0.5, beta=0.3),
    ], 200),
    "hde-accuracy": Experiment(run_hde_accuracy, _validate_hde, [
        dict(k=1_000_000, n=50, eps=1.0, beta=0.1, c=1.0),
    ], 100),
    "ut-power": Experiment(run_ut_power, _validate_ut, [
        dict(k=k, alpha=a, eps=1.0, delta=0.01) for k in (20, 100, 400) for a in (0.25, 0.5)
    ], 500),
    "zsum-error": Experiment(run_zsum_error, _validate_lam, [dict(lam=lam, L=50) for lam in (0, 5, 281)], 10_000),
    "histogram-error": Experiment(run_histogram_error, _validate_lam, [
        dict(lam=lam, k=10, L=100) for lam in (0, 5, 281)
    ], 10_000),
    "audit-de": Experiment(run_audit_de, _validate_audit_de, [
        dict(k=2, n=8, eps=1.0, delta=0.01, gamma=g) for g in (0.5, 1.0)
    ], 500_000),
    "audit-ut": Experiment(run_audit_ut, _validate_audit_ut, [
        dict(k=2, n=20, eps=1.0, delta=0.01, gamma=0.5)
    ], 20_000),
    "audit-zsum": Experiment(run_audit_zsum, _validate_audit_zsum, [
        dict(lam=20, delta=0.1, L=8),
        dict(lam=281, delta=0.1, eps=1.0, L=8),
    ], 0),
    "mod2-security": Experiment(run_mod2_security, _validate_mod2, [dict(n=2, sigma=8, h="11")], 1_000_000),
    "lemma-suite": Experiment(run_lemma_suite, lambda p: None, [dict()], 0),
}


def _passes(metric: str, value: float, threshold: Optional[float]) -> Optional[bool]:
    if threshold is None:
        return None
    # rates and indicator checks must reach the threshold; errors must stay under it
    if metric.endswith("_rate") or metric.startswith("lemma:"):
        return value >= threshold
    return value <= threshold


def run_point(name: str, params: dict, index: int, seed: int, trials: Optional[int] = None) -> list:
    exp = EXPERIMENT_TABLE[name]
    rng = RandomSource(seed).child(name).child(index)
    count = trials if trials is not None else int(params.get("trials", exp.trials))
    start = time.perf_counter()
    raw = exp.run(params, rng, count)
    elapsed = time.perf_counter() - start
    return [
        ResultRow(name, index, dict(point), metric, float(value), float(hw), int(n), threshold,
                  _passes(metric, float(value), threshold), elapsed)
        for metric, value, hw, n, threshold, _, point in raw
    ]


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    exp = EXPERIMENT_TABLE[config.name]
    points = config.points if config.points is not None else []
    result = ExperimentResult()
    valid = []
    for i, point in enumerate(points):
        try:
            exp.validate(point)
            valid.append((i, point))
        except (ParameterError, KeyError, ValueError) as err:
            result.errors.append((i, point, f"{type(err).__name__}: {err}"))
    args = [(config.name, point, i, config.seed, config.trials) for i, point in valid]
    if config.jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            # map keeps grid order regardless of completion order
            outputs = list(pool.map(_run_args, args))
    else:
        outputs = [_run_args(a) for a in args]
    for rows in outputs:
        result.rows.extend(rows)
    if config.name == "ut-power":
        result.rows.extend(c_m_scaling_rows(result.rows))
    return result


def _run_args(args):
    return run_point(*args)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".9g")
    return str(value)


def format_params(params: dict) -> str:
    return ";".join(f"{k}={_fmt(v)}" for k, v in sorted(params.items()))


def to_csv(result: ExperimentResult, timing: bool = False) -> str:
    buf = io.StringIO()
    buf.write(f"# schema_version={SCHEMA_VERSION}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS + (["wall_time"] if timing else []))
    for r in result.rows:
        row = [r.experiment, r.point, format_params(r.params), r.metric, _fmt(r.value), _fmt(r.half_width),
               r.trials, _fmt(r.threshold), _fmt(r.passed)]
        writer.writerow(row + ([_fmt(r.wall_time)] if timing else []))
    for i, point, message in result.errors:
        buf.write(f"# error: point={i} params={format_params(point)} {message}\n")
    return buf.getvalue()


def default_config(name: str, **overrides) -> ExperimentConfig:
    return ExperimentConfig(name=name, points=[dict(p) for p in EXPERIMENT_TABLE[name].defaults], **overrides)
