"""Monte Carlo estimation, exact Markov-chain oracles and bound verdicts."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from functools import partial
from typing import Callable

import numpy as np
from scipy import linalg

from . import bounds as B
from ._rng import DEFAULT_SEED, trial_rng
from ._stats import Z95, wilson_interval
from .potential import binomial_pmf, binomial_upper_tail
from .processes import (DEFAULT_CAP, DomainError, Kind, ProcessSpec, hitting_time,
                        run_climb_watch, run_dip_watch, run_with_return_watch)

ORACLE_MAX_STATES = 5000
MARGIN_SE = 3.0


class OracleSizeError(ValueError):
    pass


class InvalidBoundError(ValueError):
    """A verdict was requested against a bound whose hypotheses fail."""


@dataclass
class MonteCarloSummary:
    trials: int
    mean: float
    stderr: float
    ci95: tuple[float, float]
    censored: int
    seed: int
    successes: int | None = None

    @property
    def all_censored(self) -> bool:
        return self.censored == self.trials

    def to_dict(self) -> dict:
        d = {"trials": self.trials, "mean": self.mean, "stderr": self.stderr,
             "ci95": list(self.ci95), "censored": self.censored, "seed": self.seed,
             "all_censored": self.all_censored}
        if self.successes is not None:
            d["successes"] = self.successes
        return d


def summarize_times(times: list, seed: int) -> MonteCarloSummary:
    """Aggregate hitting times; ``None`` entries are censored and excluded from the mean."""
    done = [float(t) for t in times if t is not None]
    censored = len(times) - len(done)
    if not done:
        nan = float("nan")
        return MonteCarloSummary(len(times), nan, nan, (nan, nan), censored, seed)
    m = len(done)
    mean = math.fsum(done) / m
    if m > 1:
        var = math.fsum((t - mean) ** 2 for t in done) / (m - 1)
        se = math.sqrt(var / m)
    else:
        se = 0.0
    return MonteCarloSummary(len(times), mean, se, (mean - Z95 * se, mean + Z95 * se),
                             censored, seed)


def summarize_events(outcomes: list, seed: int) -> MonteCarloSummary:
    """Aggregate Bernoulli outcomes; ``None`` marks a censored trial."""
    done = [bool(o) for o in outcomes if o is not None]
    censored = len(outcomes) - len(done)
    if not done:
        nan = float("nan")
        return MonteCarloSummary(len(outcomes), nan, nan, (nan, nan), censored, seed, 0)
    m, s = len(done), sum(done)
    phat = s / m
    return MonteCarloSummary(m + censored, phat, math.sqrt(phat * (1 - phat) / m),
                             wilson_interval(s, m), censored, seed, s)


def _run_indexed(fn: Callable, seed: int, start: int, stop: int) -> list:
    return [fn(trial_rng(seed, i)) for i in range(start, stop)]


def run_trials(fn: Callable, trials: int, seed: int, workers: int = 1,
               start: int = 0) -> list:
    """Evaluate ``fn(rng_i)`` for trial indices ``start..start+trials-1``.

    Each trial's stream depends only on ``(seed, i)``; results come back in
    index order whatever ``workers`` is.  ``fn`` must be picklable when
    ``workers > 1``.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    stop = start + trials
    if workers <= 1:
        return _run_indexed(fn, seed, start, stop)
    edges = np.linspace(start, stop, workers * 4 + 1).astype(int)
    chunks = [(a, b) for a, b in zip(edges[:-1], edges[1:]) if b > a]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = pool.map(_run_indexed, [fn] * len(chunks), [seed] * len(chunks),
                         [a for a, _ in chunks], [b for _, b in chunks])
        return [x for part in parts for x in part]


def estimate_hitting_time(spec: ProcessSpec, trials: int, cap: int = DEFAULT_CAP,
                          seed: int = DEFAULT_SEED, workers: int = 1) -> MonteCarloSummary:
    times = run_trials(partial(hitting_time, spec, cap), trials, seed, workers)
    return summarize_times(times, seed)


def estimate_event_probability(event: Callable, trials: int, seed: int = DEFAULT_SEED,
                               workers: int = 1) -> MonteCarloSummary:
    """Estimate ``Pr[event(rng)]``; the event returns ``True``, ``False`` or ``None`` (censored)."""
    return summarize_events(run_trials(event, trials, seed, workers), seed)


# exact oracle

def _transition_row(spec: ProcessSpec, x: int) -> np.ndarray:
    """Distribution of the successor of ``x`` over ``0..k``."""
    k = spec.k
    kind = spec.kind
    if x == 0:
        if kind is Kind.BINOMIAL_WITH_ZERO:
            law = spec.zero_law.pmf()
            row = np.zeros(max(k, len(law) - 1) + 1)
            row[:len(law)] = law
            return row
        if kind is Kind.BINOMIAL_FRESH_START:
            fs = spec.fresh_start
            row = np.zeros(max(k, fs.xmin) + 1)
            row[0] = 1 - fs.p
            row[fs.xmin] += fs.p
            return row
        raise DomainError(f"{kind.value} is not defined at state 0")
    growth = 1.0 if kind is Kind.UNBIASED_BINOMIAL else 1.0 + spec.delta
    p = growth * x / k
    if p > 1:
        raise DomainError(f"success probability {p:.6g} > 1 at state {x}: "
                          "the binomial condition needs state <= k/(1+delta)")
    row = binomial_pmf(k, p)
    if kind in (Kind.BINOMIAL_CLAMPED, Kind.UNBIASED_BINOMIAL):
        row[1] += row[0]
        row[0] = 0.0
    elif kind is Kind.BINOMIAL_FRESH_START:
        fs = spec.fresh_start
        if fs.xmin > k:
            row = np.concatenate([row, np.zeros(fs.xmin - k)])
        grown = row
        row = (1 - fs.p) * grown
        # max(B, xmin) under the fresh-start branch
        row[fs.xmin] += fs.p * math.fsum(grown[:fs.xmin + 1])
        row[fs.xmin + 1:] += fs.p * grown[fs.xmin + 1:]
    return row


def exact_hitting_time_markov(spec: ProcessSpec) -> float:
    """Expected hitting time of ``target_n`` from ``x0``, computed exactly.

    Binomial kinds: dense solve of ``h = 1 + Q h`` over the transient
    states below ``n``.  Deterministic and jackpot kinds use closed forms.
    """
    n, x0 = spec.target_n, spec.x0
    if x0 >= n:
        return 0.0
    if spec.kind is Kind.DETERMINISTIC:
        if x0 == 0:
            return math.inf
        return float(B.ceil_log(n / x0, 1 + spec.delta))
    if spec.kind is Kind.JACKPOT:
        return (n - 1) / spec.delta
    if spec.k > ORACLE_MAX_STATES:
        raise OracleSizeError(f"k={spec.k} exceeds the oracle limit {ORACLE_MAX_STATES}")
    lo = 1 if spec.kind in (Kind.BINOMIAL_CLAMPED, Kind.UNBIASED_BINOMIAL) else 0
    states = np.arange(lo, n)
    size = len(states)
    Q = np.zeros((size, size))
    for r, x in enumerate(states):
        row = _transition_row(spec, int(x))
        Q[r, :] = row[lo:n] if len(row) >= n else np.pad(row, (0, n - len(row)))[lo:n]
    A = np.eye(size) - Q
    try:
        h = linalg.solve(A, np.ones(size))
    except linalg.LinAlgError as exc:
        raise DomainError("target is not reached almost surely from every state") from exc
    return float(h[x0 - lo])


# verdicts

class Direction(str, Enum):
    UPPER_BOUNDS_MEAN = "upper_bounds_mean"
    UPPER_BOUNDS_PROB = "upper_bounds_prob"
    LOWER_BOUNDS_PROB = "lower_bounds_prob"


@dataclass
class Verdict:
    bound: float
    empirical: MonteCarloSummary
    direction: Direction
    status: str
    margin: float
    reason: str = ""
    flags: list[str] = field(default_factory=list)

    @property
    def consistent(self) -> bool:
        return self.status == "consistent"

    @property
    def withheld(self) -> bool:
        return self.status == "withheld"

    def to_dict(self) -> dict:
        return {"status": self.status, "consistent": self.consistent, "bound": self.bound,
                "margin": self.margin, "direction": self.direction.value,
                "reason": self.reason, "flags": list(self.flags),
                "empirical": self.empirical.to_dict()}


def check_theorem(bound: B.BoundReport, empirical: MonteCarloSummary, direction,
                  *, key: str | None = None, require_valid: bool = True,
                  margin_se: float = MARGIN_SE) -> Verdict:
    """Compare a Monte Carlo estimate with a bound at ``margin_se`` standard errors.

    Upper bounds are consistent when ``estimate - margin*se <= bound``,
    lower bounds when ``estimate + margin*se >= bound``.  Any censoring
    withholds a verdict on an upper bound, since dropping censored runs
    biases the estimate downwards.
    """
    direction = Direction(direction)
    if require_valid and not bound.valid:
        raise InvalidBoundError(
            f"{bound.theorem_id} hypotheses fail: {', '.join(bound.violated_preconditions)}")
    value = bound.auxiliary[key] if key is not None else bound.bound
    flags = list(bound.violated_preconditions)
    if empirical.all_censored:
        return Verdict(value, empirical, direction, "withheld", math.nan,
                       "all trials censored", flags)
    if direction is not Direction.LOWER_BOUNDS_PROB and empirical.censored:
        return Verdict(value, empirical, direction, "withheld", math.nan,
                       f"{empirical.censored} of {empirical.trials} trials censored", flags)
    if direction is Direction.LOWER_BOUNDS_PROB:
        margin = empirical.mean + margin_se * empirical.stderr - value
    else:
        margin = value - (empirical.mean - margin_se * empirical.stderr)
    status = "consistent" if margin >= 0 else "inconsistent"
    return Verdict(value, empirical, direction, status, margin, flags=flags)


def bound_for_spec(spec: ProcessSpec) -> B.BoundReport:
    """The hitting-time theorem that covers ``spec``'s kind."""
    kind, n, k, delta = spec.kind, spec.target_n, spec.k, spec.delta
    if not kind.binomial:
        raise ValueError(f"no hitting-time theorem is attached to {kind.value}")
    gamma0 = spec.gamma0 if spec.gamma0 is not None else _min_gamma0(spec)
    if kind is Kind.BINOMIAL_CLAMPED:
        return B.thm1_bound(delta, n, gamma0, k)
    if kind is Kind.BINOMIAL_WITH_ZERO:
        e0 = spec.zero_law.min_expectation(spec.d0)
        return B.thm2_bound(delta, n, gamma0, k, e0)
    if kind is Kind.BINOMIAL_FRESH_START:
        return B.thm3_bound(delta, n, k, spec.fresh_start.xmin, spec.fresh_start.p)
    if kind is Kind.UNBIASED_BINOMIAL:
        return B.nodrift_bound(n, gamma0, k)
    raise ValueError(f"no hitting-time theorem is attached to {kind.value}")


def _min_gamma0(spec: ProcessSpec) -> float:
    """Smallest admissible slack ``(n-1)/k``, used when gamma0 is not given."""
    return (spec.target_n - 1) / spec.k


def verify_hitting_time(spec: ProcessSpec, trials: int, cap: int = DEFAULT_CAP,
                        seed: int = DEFAULT_SEED, *, bound: B.BoundReport | None = None,
                        workers: int = 1, require_valid: bool = True) -> Verdict:
    report = bound_for_spec(spec) if bound is None else bound
    summary = estimate_hitting_time(spec, trials, cap, seed, workers)
    return check_theorem(report, summary, Direction.UPPER_BOUNDS_MEAN,
                         require_valid=require_valid)


# event checks

def _dip_event(spec, D, rng):
    return run_dip_watch(spec, D, rng)


def _climb_event(spec, D, rng):
    return run_climb_watch(spec, D, rng)


def _return_event(spec, hi, lo, cap, rng):
    rec = run_with_return_watch(spec, hi, lo, cap, rng)
    if rec.censored and not rec.returned_lo:
        return "censored" if rec.reached_hi else "skip"
    if not rec.reached_hi:
        return "skip"
    return rec.returned_lo


def dip_probability_check(spec: ProcessSpec, D: int, trials: int,
                          seed: int = DEFAULT_SEED, workers: int = 1) -> Verdict:
    """Frequency of falling to ``D/2 + s*delta*D/2`` against ``exp(-delta*D/169)``."""
    report = B.dip_bound(spec.delta, D, spec.target_n)
    summary = estimate_event_probability(partial(_dip_event, spec, D), trials, seed, workers)
    return check_theorem(report, summary, Direction.UPPER_BOUNDS_PROB, require_valid=False)


def climb_success_check(spec: ProcessSpec, D: int, trials: int,
                        seed: int = DEFAULT_SEED, workers: int = 1) -> Verdict:
    """In-window success frequency from ``D`` against ``max(0.2782, 1-1/(e^{delta D/169}-1))``."""
    report = B.climb_floor(spec.delta, D, spec.target_n)
    summary = estimate_event_probability(partial(_climb_event, spec, D), trials, seed, workers)
    return check_theorem(report, summary, Direction.LOWER_BOUNDS_PROB, require_valid=False)


def return_thresholds(delta: float) -> tuple[int, int]:
    """``(hi, lo)``: ``(ceil(100/delta), floor(50/delta))`` or ``(32, 31)`` for ``delta > 1``."""
    if delta <= 1:
        return math.ceil(100 / delta), math.floor(50 / delta)
    return 32, 31


def return_bound(spec: ProcessSpec, hi: int, lo: int) -> B.BoundReport:
    delta, n = spec.delta, spec.target_n
    violated = []
    if delta <= 1:
        value = B.RETURN_PROB_SMALL_DELTA
        if n <= 100 / delta:
            violated.append("n > 100/delta")
        if hi < 100 / delta:
            violated.append("hi >= 100/delta")
        if lo > 50 / delta:
            violated.append("lo <= 50/delta")
    else:
        value = B.RETURN_PROB_LARGE_DELTA
        if n <= 32:
            violated.append("n > 32")
        if hi < 32:
            violated.append("hi >= 32")
        if lo > 31:
            violated.append("lo < 32")
    return B.BoundReport("return", {"delta": delta, "n": n, "hi": hi, "lo": lo}, value,
                         unit="probability", violated_preconditions=violated)


def return_probability_check(spec: ProcessSpec, trials: int, seed: int = DEFAULT_SEED,
                             *, hi: int | None = None, lo: int | None = None,
                             cap: int = DEFAULT_CAP, workers: int = 1,
                             max_attempts: int | None = None) -> Verdict:
    """Return frequency among ``trials`` trajectories that reached ``hi``.

    Trial indices are consumed in order until ``trials`` qualifying runs
    have been seen, so the estimate is reproducible for a given seed.
    """
    if hi is None or lo is None:
        dhi, dlo = return_thresholds(spec.delta)
        hi = dhi if hi is None else hi
        lo = dlo if lo is None else lo
    report = return_bound(spec, hi, lo)
    if max_attempts is None:
        max_attempts = 100 * trials
    event = partial(_return_event, spec, hi, lo, cap)
    outcomes: list = []
    start = 0
    batch = trials
    while len(outcomes) < trials and start < max_attempts:
        for res in run_trials(event, min(batch, max_attempts - start), seed, workers, start):
            if res == "skip":
                continue
            outcomes.append(None if res == "censored" else res)
            if len(outcomes) == trials:
                break
        start += batch
    if not outcomes:
        nan = float("nan")
        summary = MonteCarloSummary(0, nan, nan, (nan, nan), 0, seed, 0)
        return Verdict(report.bound, summary, Direction.UPPER_BOUNDS_PROB, "withheld",
                       nan, "no trajectory reached the high threshold", report.violated_preconditions)
    summary = summarize_events(outcomes, seed)
    verdict = check_theorem(report, summary, Direction.UPPER_BOUNDS_PROB, require_valid=False)
    if len(outcomes) < trials:
        verdict.flags.append(f"only {len(outcomes)} qualifying trajectories")
    return verdict


# exact binomial tail check

@dataclass
class MeanTailReport:
    checked: int
    violations: list[tuple[int, float, float]]
    min_tail: float
    argmin: tuple[int, float]

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {"checked": self.checked, "violations": [list(v) for v in self.violations],
                "min_tail": self.min_tail, "argmin": list(self.argmin), "passed": self.passed}


def mean_threshold(k: int, p: float) -> int:
    """``ceil(k*p)`` robust to representation error when ``k*p`` is an integer."""
    mean = k * p
    r = round(mean)
    if abs(mean - r) <= 1e-9 * max(1.0, mean):
        return int(r)
    return math.ceil(mean)


def default_p_grid(k: int) -> list[float]:
    grid = {round(0.05 * i, 12) for i in range(1, 21)} | {1 / k}
    return sorted(p for p in grid if p >= 1 / k)


def mean_tail_exact_check(k_max: int, p_grid=None, floor: float = 0.25) -> MeanTailReport:
    """Exact ``Pr[Bin(k, p) >= kp]`` for ``k <= k_max`` and admissible ``p >= 1/k``."""
    checked = 0
    violations = []
    best = (math.inf, (0, 0.0))
    for k in range(1, k_max + 1):
        grid = default_p_grid(k) if p_grid is None else [p for p in p_grid if p >= 1 / k]
        if p_grid is not None and 1 / k not in grid:
            grid = sorted(set(grid) | {1 / k})
        for p in grid:
            tail = binomial_upper_tail(k, p, mean_threshold(k, p))
            checked += 1
            if tail < floor:
                violations.append((k, p, tail))
            if tail < best[0]:
                best = (tail, (k, p))
    return MeanTailReport(checked, violations, best[0], best[1])


__all__ = [
    "MonteCarloSummary", "Verdict", "Direction", "InvalidBoundError", "OracleSizeError",
    "estimate_hitting_time", "estimate_event_probability", "exact_hitting_time_markov",
    "check_theorem", "bound_for_spec", "verify_hitting_time", "dip_probability_check",
    "climb_success_check", "return_probability_check", "mean_tail_exact_check",
    "summarize_times", "summarize_events", "run_trials",
]
