"""Acceptance criteria, one test each, printing a PASS/FAIL line per criterion."""

import itertools
import math
import time
from fractions import Fraction

import numpy as np

from conftest import ACCEPTANCE_LINES
from updrift import bounds as B
from updrift import ea as E
from updrift import verify as V
from updrift._rng import DEFAULT_SEED, trial_rng
from updrift.potential import check_g_drift_bounds, g, taylor_lower, taylor_upper
from updrift.processes import FreshStart, Kind, ProcessSpec, ZeroLaw, run_to_target

TRIALS = 10_000


def report(number: int, ok: bool, detail: str, started: float) -> None:
    line = f"CRITERION {number}: {'PASS' if ok else 'FAIL'} ({time.perf_counter() - started:.1f}s) {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def fmt(v: V.Verdict) -> str:
    e = v.empirical
    flags = f" flags={v.flags}" if v.flags else ""
    return (f"estimate={e.mean:.6g}+-{e.stderr:.3g} bound={v.bound:.6g} "
            f"margin={v.margin:.4g} censored={e.censored} status={v.status}{flags}")


def test_criterion_01_deterministic_closed_form():
    t = time.perf_counter()
    bad = []
    for delta, n in itertools.product([0.1, 0.5, 1, 3], [10, 100, 1000]):
        spec = ProcessSpec(Kind.DETERMINISTIC, delta, n)
        hit = run_to_target(spec, 10_000, trial_rng(0, 0)).hit_time
        # exact rational oracle: least t with (1+delta)^t >= n
        growth, steps = Fraction(str(1 + delta)), 0
        while growth ** steps < n:
            steps += 1
        ceil_log = math.ceil(math.log(n) / math.log(1 + delta))
        if not hit == steps == ceil_log == V.exact_hitting_time_markov(spec):
            bad.append((delta, n, hit, steps))
    report(1, not bad, f"12 (delta, n) pairs, mismatches={bad}", t)


def test_criterion_02_jackpot():
    t = time.perf_counter()
    spec = ProcessSpec(Kind.JACKPOT, 0.5, 11)
    s = V.estimate_hitting_time(spec, 100_000, seed=DEFAULT_SEED)
    exact = V.exact_hitting_time_markov(spec)
    ok = abs(s.mean - 20) <= 0.05 * 20 and exact == 20
    report(2, ok, f"mean={s.mean:.4f} (target 20 +-5%), exact={exact}", t)


def test_criterion_03_binomial_tail_quarter():
    t = time.perf_counter()
    rep = V.mean_tail_exact_check(200)
    report(3, rep.passed, f"checked={rep.checked} violations={len(rep.violations)} "
                          f"min_tail={rep.min_tail:.6f} at (k,p)={rep.argmin}", t)


def test_criterion_04_g_drift_sandwich():
    t = time.perf_counter()
    failures, checked = [], 0
    min_lb = min_ub = math.inf
    for k in range(1, 501):
        grid = sorted({1 / k} | {round(0.1 * i, 12) for i in range(1, 11) if 0.1 * i >= 1 / k})
        for p in grid:
            r = check_g_drift_bounds(k, p, tol=1e-12)
            checked += 1
            min_lb, min_ub = min(min_lb, r.slack_lb), min(min_ub, r.slack_ub)
            if not (r.lb_holds and r.ub_holds):
                failures.append((k, p))
    report(4, not failures, f"checked={checked} failures={len(failures)} "
                            f"min_slack_lb={min_lb:.3g} min_slack_ub={min_ub:.3g}", t)


def test_criterion_05_taylor_bounds():
    t = time.perf_counter()
    worst = 0.0
    for a in np.round(np.arange(1, 1001) * 0.1, 10):
        for x in np.arange(0, 201, 1.0):
            gx = g(x)
            worst = max(worst, taylor_lower(a, x) - gx, gx - taylor_upper(a, x))
    report(5, worst <= 1e-12, f"a in 0.1..100 step 0.1, x in 0..200 step 1, worst violation={worst:.3g}", t)


def _oracle_grid():
    for kind, delta in [(Kind.BINOMIAL_CLAMPED, 0.5), (Kind.BINOMIAL_CLAMPED, 1.0),
                        (Kind.UNBIASED_BINOMIAL, 0.0)]:
        for k, n in [(20, 5), (40, 10), (60, 20)]:
            if n - 1 <= k / (1 + delta):
                yield ProcessSpec(kind, delta, n, k=k)
    yield ProcessSpec(Kind.BINOMIAL_WITH_ZERO, 0.5, 15, k=40, zero_law=ZeroLaw.binomial(40, 1 / 40), x0=0)
    yield ProcessSpec(Kind.BINOMIAL_WITH_ZERO, 1.0, 20, k=60, zero_law=ZeroLaw.point(1), x0=0)
    yield ProcessSpec(Kind.BINOMIAL_FRESH_START, 1.0, 15, k=40, fresh_start=FreshStart(3, 0.2), x0=0)
    yield ProcessSpec(Kind.BINOMIAL_FRESH_START, 0.5, 20, k=60, fresh_start=FreshStart(8, 0.5), x0=0)


def test_criterion_06_first_theorem_small_delta_and_oracle():
    t = time.perf_counter()
    spec = ProcessSpec(Kind.BINOMIAL_CLAMPED, 0.2, 100, k=2000, gamma0=0.05)
    v = V.verify_hitting_time(spec, TRIALS, seed=DEFAULT_SEED)
    grid_bad, worst = [], 0.0
    specs = list(_oracle_grid())
    for i, s in enumerate(specs):
        exact = V.exact_hitting_time_markov(s)
        mc = V.estimate_hitting_time(s, TRIALS, seed=DEFAULT_SEED + i)
        z = abs(mc.mean - exact) / mc.stderr
        worst = max(worst, z)
        if z > 3 or mc.censored:
            grid_bad.append((s.kind.value, s.k, s.target_n, round(z, 2)))
    ok = v.consistent and v.empirical.censored == 0 and not grid_bad
    report(6, ok, f"{fmt(v)}; oracle grid {len(specs)} specs, worst |z|={worst:.2f}, "
                  f"outside 3se={grid_bad}", t)


def test_criterion_07_first_theorem_large_delta():
    t = time.perf_counter()
    spec = ProcessSpec(Kind.BINOMIAL_CLAMPED, 3.0, 40, k=200, gamma0=0.2)
    rep = B.thm1_bound(3.0, 40, 0.2, 200)
    assert math.isclose(rep.bound, 2.6 * math.log(40, 4) + 81, rel_tol=1e-12)
    v = V.verify_hitting_time(spec, TRIALS, seed=DEFAULT_SEED, bound=rep)
    report(7, v.consistent, fmt(v), t)


def test_criterion_08_return_probabilities():
    t = time.perf_counter()
    small = ProcessSpec(Kind.BINOMIAL_CLAMPED, 1.0, 400, k=800)
    v1 = V.return_probability_check(small, TRIALS, DEFAULT_SEED, hi=100, lo=50)
    large = ProcessSpec(Kind.BINOMIAL_CLAMPED, 3.0, 200, k=800)
    v2 = V.return_probability_check(large, TRIALS, DEFAULT_SEED, hi=32, lo=31)
    ok = (v1.consistent and v2.consistent and v1.bound == 0.7218 and v2.bound < 0.22
          and v1.empirical.trials == v2.empirical.trials == TRIALS)
    report(8, ok, f"delta=1: {fmt(v1)}; delta=3: {fmt(v2)}", t)


def test_criterion_09_climb_success():
    t = time.perf_counter()
    spec = ProcessSpec(Kind.BINOMIAL_CLAMPED, 1.0, 1000, k=4000)
    v = V.climb_success_check(spec, 100, TRIALS, DEFAULT_SEED)
    ok = v.consistent and v.bound == 0.2782 and not v.flags
    report(9, ok, fmt(v), t)


def test_criterion_10_dip_bound():
    t = time.perf_counter()
    spec = ProcessSpec(Kind.BINOMIAL_CLAMPED, 1.0, 1000, k=4000)
    v1 = V.dip_probability_check(spec, 100, TRIALS, DEFAULT_SEED)
    v2 = V.dip_probability_check(spec, 338, TRIALS, DEFAULT_SEED)
    ok = v1.consistent and v2.consistent and not v1.flags and not v2.flags
    report(10, ok, f"D=100: {fmt(v1)}; D=338: {fmt(v2)}", t)


def test_criterion_11_second_theorem_with_zero():
    t = time.perf_counter()
    parts, ok = [], True
    for delta in (0.5, 2.0):
        spec = ProcessSpec(Kind.BINOMIAL_WITH_ZERO, delta, 100, k=300, gamma0=0.5,
                           zero_law=ZeroLaw.binomial(300, 1 / 300), x0=0)
        v = V.verify_hitting_time(spec, TRIALS, seed=DEFAULT_SEED)
        e0 = spec.zero_law.min_expectation(spec.d0)
        ok &= v.consistent
        parts.append(f"delta={delta} E0={e0:.6f}: {fmt(v)}")
    report(11, ok, "; ".join(parts), t)


def test_criterion_12_third_theorem_fresh_start():
    t = time.perf_counter()
    spec = ProcessSpec(Kind.BINOMIAL_FRESH_START, 1.0, 1024, k=4096,
                       fresh_start=FreshStart(128, 0.25), x0=0)
    v = V.verify_hitting_time(spec, TRIALS, seed=DEFAULT_SEED)
    ok = v.consistent and math.isclose(v.bound, 46.8, rel_tol=1e-12)
    report(12, ok, fmt(v), t)


def _ea_summary(config, runs, cap, tag):
    evals = []
    for i in range(runs):
        rec = E.ea_run(config, cap, trial_rng(DEFAULT_SEED, i, tag))
        evals.append(rec.evaluations if rec.hit else None)
    return V.summarize_times(evals, DEFAULT_SEED)


def test_criterion_13_level_based_tournament():
    t = time.perf_counter()
    probe = E.EaConfig(50, 1, E.Selection.TOURNAMENT2, 1 / 500)
    lam = E.suggest_ea_lambda(probe)
    config = E.EaConfig(50, lam, E.Selection.TOURNAMENT2, 1 / 500)
    rep = E.level_bound_for(config)
    s = _ea_summary(config, 20, 10_000, 13)
    v = V.check_theorem(rep, s, V.Direction.UPPER_BOUNDS_MEAN)
    ok = v.consistent and rep.valid
    report(13, ok, f"lambda={lam} delta={rep.inputs['delta']:.4f} t0={rep.auxiliary['t0']:.4g} "
                   f"{fmt(v)}", t)


def test_criterion_14_level_based_large_delta_ranking():
    t = time.perf_counter()
    config = E.EaConfig(32, 256, E.Selection.RANKING_MU_COMMA, 1 / 32, E.Fitness.LEADINGONES, mu=16)
    # gamma0*lambda >= 32 is required, so gamma0 = 1/8 rather than mu/lambda = 1/16
    rep = E.level_bound_for(config, gamma0=0.125)
    s = _ea_summary(config, 50, 100_000, 14)
    v = V.check_theorem(rep, s, V.Direction.UPPER_BOUNDS_MEAN, require_valid=False)
    report(14, v.consistent, f"theorem={rep.theorem_id} delta={rep.inputs['delta']:.4f} "
                             f"t0={rep.auxiliary['t0']:.6g} lambda_min={rep.auxiliary['lambda_min']:.1f} "
                             f"{fmt(v)}", t)


def test_criterion_15_scaling_trend():
    t = time.perf_counter()
    ns, means, parts, censored = [16, 32, 64], [], [], 0
    for n in ns:
        lam = math.ceil(n * math.log(n))
        config = E.EaConfig(n, lam, E.Selection.FITNESS_PROPORTIONATE, 1 / (6 * n * n))
        s = _ea_summary(config, 30, 1_000_000, n)
        censored += s.censored
        means.append(s.mean)
        parts.append(f"n={n} lam={lam} mean={s.mean:.4g}+-{s.stderr:.3g}")
    slope = float(np.polyfit(np.log(ns), np.log(means), 1)[0])
    ok = 1.5 <= slope <= 4.0 and censored == 0
    report(15, ok, f"slope={slope:.3f} (window [1.5, 4.0]); " + "; ".join(parts), t)
