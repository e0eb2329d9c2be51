import math
from functools import partial

import numpy as np
import pytest
from scipy.stats import binom

from updrift import verify as V
from updrift._rng import trial_rng
from updrift._stats import wilson_interval
from updrift.bounds import BoundReport
from updrift.processes import FreshStart, Kind, ProcessSpec, ZeroLaw, make_stepper

# exact oracle value, cross-checked by plain value iteration on scipy's pmf
CLAMPED_K40_REF = 7.084949289192787


def summary(mean, se, censored=0, trials=100):
    return V.MonteCarloSummary(trials, mean, se, (mean - 2 * se, mean + 2 * se), censored, 1)


def _coin(rng):
    return rng.random() < 0.5


def _jackpot_success(rng):
    spec = ProcessSpec(Kind.JACKPOT, 0.5, 11)
    return make_stepper(spec)(1, rng) == 11


def test_deterministic_mean_exact():
    s = V.estimate_hitting_time(ProcessSpec(Kind.DETERMINISTIC, 1.0, 8), 20)
    assert s.mean == 3 and s.stderr == 0 and s.censored == 0


def test_jackpot_estimate_and_closed_form():
    spec = ProcessSpec(Kind.JACKPOT, 0.5, 11)
    assert V.exact_hitting_time_markov(spec) == 20
    s = V.estimate_hitting_time(spec, 20_000, seed=3)
    assert abs(s.mean - 20) <= 0.05 * 20


def value_iteration(spec):
    n, k = spec.target_n, spec.k
    rows = {}
    for x in range(1, n):
        p = binom.pmf(np.arange(k + 1), k, (1 + spec.delta) * x / k)
        p[1] += p[0]
        rows[x] = p[1:n]
    h = np.zeros(n - 1)
    for _ in range(100_000):
        new = np.array([1 + rows[x] @ h for x in range(1, n)])
        if np.max(np.abs(new - h)) < 1e-14:
            break
        h = new
    return h[spec.x0 - 1]


def test_markov_oracle_pinned_and_independent():
    spec = ProcessSpec(Kind.BINOMIAL_CLAMPED, 0.5, 10, k=40)
    exact = V.exact_hitting_time_markov(spec)
    assert exact == pytest.approx(CLAMPED_K40_REF, rel=1e-12)
    assert exact == pytest.approx(value_iteration(spec), rel=1e-10)
    s = V.estimate_hitting_time(spec, 10_000, seed=4)
    assert abs(s.mean - exact) <= 3 * s.stderr


def test_markov_oracle_trivial_and_size():
    assert V.exact_hitting_time_markov(ProcessSpec(Kind.BINOMIAL_CLAMPED, 1.0, 2, k=2)) == pytest.approx(1.0)
    assert V.exact_hitting_time_markov(ProcessSpec(Kind.DETERMINISTIC, 1.0, 8)) == 3
    with pytest.raises(V.OracleSizeError):
        V.exact_hitting_time_markov(ProcessSpec(Kind.BINOMIAL_CLAMPED, 0.5, 10, k=6000))


@pytest.mark.parametrize("spec", [
    ProcessSpec(Kind.BINOMIAL_WITH_ZERO, 0.5, 15, k=40, zero_law=ZeroLaw.binomial(40, 1 / 40), x0=0),
    ProcessSpec(Kind.BINOMIAL_FRESH_START, 1.0, 15, k=40, fresh_start=FreshStart(3, 0.2), x0=0),
    ProcessSpec(Kind.UNBIASED_BINOMIAL, 0.0, 8, k=40),
])
def test_markov_oracle_other_kinds(spec):
    exact = V.exact_hitting_time_markov(spec)
    s = V.estimate_hitting_time(spec, 10_000, seed=5)
    assert abs(s.mean - exact) <= 3 * s.stderr


def test_parallel_equals_serial():
    spec = ProcessSpec(Kind.BINOMIAL_CLAMPED, 0.5, 10, k=40)
    a = V.estimate_hitting_time(spec, 300, seed=9, workers=1)
    b = V.estimate_hitting_time(spec, 300, seed=9, workers=2)
    assert a == b


def test_all_censored_summary():
    spec = ProcessSpec(Kind.BINOMIAL_CLAMPED, 0.1, 10_000, k=200_000)
    s = V.estimate_hitting_time(spec, 5, cap=2)
    assert s.all_censored and math.isnan(s.mean)
    with pytest.raises(ValueError):
        V.estimate_hitting_time(spec, 0)


def test_event_estimates():
    s = V.estimate_event_probability(_coin, 100_000, seed=1)
    assert s.ci95[0] <= 0.5 <= s.ci95[1]
    s = V.estimate_event_probability(_jackpot_success, 20_000, seed=2)
    assert s.ci95[0] <= 0.05 <= s.ci95[1]


def test_wilson_coverage():
    g = np.random.default_rng(10)
    covered = 0
    for _ in range(200):
        hits = int(g.binomial(400, 0.3))
        lo, hi = wilson_interval(hits, 400)
        covered += lo <= 0.3 <= hi
    assert covered >= 180


def test_check_theorem_examples():
    rep = BoundReport("x", {}, 100.0)
    assert V.check_theorem(rep, summary(40, 1), "upper_bounds_mean").consistent
    v = V.check_theorem(rep, summary(200, 1), "upper_bounds_mean")
    assert v.status == "inconsistent" and v.margin < 0
    floor = BoundReport("climb", {}, 0.2782, unit="probability")
    assert V.check_theorem(floor, summary(0.35, 0.01), "lower_bounds_prob").consistent


def test_check_theorem_refuses_invalid_and_withholds():
    bad = BoundReport("x", {}, 100.0, violated_preconditions=["n-1 <= gamma0*k"])
    with pytest.raises(V.InvalidBoundError, match="gamma0"):
        V.check_theorem(bad, summary(40, 1), "upper_bounds_mean")
    rep = BoundReport("x", {}, 100.0)
    v = V.check_theorem(rep, summary(40, 1, censored=3), "upper_bounds_mean")
    assert v.withheld and "censored" in v.reason


def test_check_theorem_uses_auxiliary_key():
    rep = BoundReport("thm1", {}, 1e4, auxiliary={"return_probability": 0.7218})
    v = V.check_theorem(rep, summary(0.8, 0.01), "upper_bounds_prob", key="return_probability")
    assert v.bound == 0.7218 and v.status == "inconsistent"


def test_mean_tail_examples_and_sweep():
    rep = V.mean_tail_exact_check(200)
    assert rep.passed and rep.checked > 4000
    assert rep.min_tail >= 0.25
    k, p = rep.argmin
    assert binom.sf(V.mean_threshold(k, p) - 1, k, p) == pytest.approx(rep.min_tail, rel=1e-9)
    assert V.mean_threshold(10, 0.3) == 3
    assert V.mean_threshold(3, 0.35) == 2


def test_mean_tail_independent_scipy_crosscheck():
    for k in (1, 7, 50, 200):
        for p in V.default_p_grid(k):
            ours = V.mean_tail_exact_check(k, [p]).min_tail if k == 1 else None
            t = V.mean_threshold(k, p)
            ref = binom.sf(t - 1, k, p)
            assert ref >= 0.25
            if ours is not None:
                assert ours == pytest.approx(ref)


def test_dip_and_climb_checks():
    spec = ProcessSpec(Kind.BINOMIAL_CLAMPED, 1.0, 1000, k=4000)
    v = V.dip_probability_check(spec, 100, 2000, seed=1)
    assert v.consistent and v.bound == pytest.approx(math.exp(-100 / 169))
    v = V.climb_success_check(spec, 100, 2000, seed=1)
    assert v.consistent
    det = ProcessSpec(Kind.DETERMINISTIC, 1.0, 1000)
    assert V.dip_probability_check(det, 100, 50).empirical.mean == 0
    v = V.dip_probability_check(spec, 50, 100)
    assert "D >= 100/delta" in v.flags


def test_return_check():
    det = ProcessSpec(Kind.DETERMINISTIC, 1.0, 1000)
    assert V.return_probability_check(det, 50).empirical.mean == 0
    spec = ProcessSpec(Kind.BINOMIAL_CLAMPED, 3.0, 200, k=800)
    v = V.return_probability_check(spec, 500, seed=2)
    assert v.consistent and v.bound == pytest.approx(1 / (math.e * (math.e - 1)))
    assert v.empirical.trials == 500


def test_bound_for_spec_dispatch():
    s = ProcessSpec(Kind.BINOMIAL_CLAMPED, 1.0, 100, k=400, gamma0=0.5)
    assert V.bound_for_spec(s).theorem_id == "thm1"
    z = ProcessSpec(Kind.BINOMIAL_WITH_ZERO, 1.0, 100, k=400, gamma0=0.5,
                    zero_law=ZeroLaw.point(1), x0=0)
    assert V.bound_for_spec(z).auxiliary["E0"] == 1.0
    with pytest.raises(ValueError):
        V.bound_for_spec(ProcessSpec(Kind.JACKPOT, 0.5, 11))


def test_verify_hitting_time_end_to_end():
    spec = ProcessSpec(Kind.BINOMIAL_CLAMPED, 1.0, 100, k=400, gamma0=0.5)
    v = V.verify_hitting_time(spec, 300, seed=3)
    assert v.consistent
    d = v.to_dict()
    assert d["status"] == "consistent" and d["empirical"]["censored"] == 0


def test_run_trials_is_index_stable():
    fn = partial(lambda spec, rng: make_stepper(spec)(5, rng), ProcessSpec(Kind.BINOMIAL_CLAMPED, 1.0, 100, k=400))
    a = V.run_trials(fn, 20, seed=1)
    b = [make_stepper(ProcessSpec(Kind.BINOMIAL_CLAMPED, 1.0, 100, k=400))(5, trial_rng(1, i)) for i in range(20)]
    assert a == b
    assert V.run_trials(fn, 5, seed=1, start=3) == a[3:8]
