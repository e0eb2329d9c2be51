import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import binom

from updrift.potential import (SizeError, binomial_central_moments, binomial_pmf,
                               binomial_upper_tail, check_g_drift_bounds,
                               exact_binomial_g_expectation, g, taylor_lower, taylor_upper)


def test_g_values():
    assert g(0) == 0.0
    assert g(1) == 0.0
    assert g(math.e) == pytest.approx(math.e, abs=1e-15)
    with pytest.raises(ValueError):
        g(-1)


def test_taylor_examples():
    assert taylor_upper(1, 1) == taylor_lower(1, 1) == 0.0
    assert taylor_upper(1, 2) == pytest.approx(2.0, abs=1e-12)
    assert taylor_lower(1, 2) == pytest.approx(4 / 3, abs=1e-12)
    assert taylor_lower(1, 2) <= g(2) <= taylor_upper(1, 2)
    assert taylor_upper(2, 2) == pytest.approx(2 * math.log(2), abs=1e-15)
    assert taylor_lower(2, 2) == pytest.approx(2 * math.log(2), abs=1e-15)


@settings(max_examples=300, deadline=None)
@given(a=st.floats(0.1, 100), x=st.floats(0, 200))
def test_taylor_sandwich_property(a, x):
    assert taylor_lower(a, x) - 1e-12 * max(1, abs(g(x))) <= g(x)
    assert g(x) <= taylor_upper(a, x) + 1e-12 * max(1, abs(g(x)))


@settings(max_examples=200, deadline=None)
@given(x=st.floats(1e-6, 1e3), y=st.floats(1e-6, 1e3), t=st.floats(0.001, 0.999))
def test_g_convex(x, y, t):
    assert g(t * x + (1 - t) * y) <= t * g(x) + (1 - t) * g(y) + 1e-12 * max(1.0, abs(g(x)), abs(g(y)))


def test_moments():
    m = binomial_central_moments(10, 0.5)
    assert (m.mean, m.variance, m.third_central) == (5, 2.5, 0)
    m = binomial_central_moments(1, 1.0)
    assert (m.mean, m.variance, m.third_central) == (1, 0, 0)
    m = binomial_central_moments(4, 0.25)
    assert (m.mean, m.variance, m.third_central) == pytest.approx((1, 0.75, 0.375))


@pytest.mark.parametrize("k,p", [(1, 0.3), (10, 0.1), (200, 0.5), (5000, 1e-3), (10_000, 0.999)])
def test_pmf_matches_scipy_and_sums_to_one(k, p):
    pmf = binomial_pmf(k, p)
    assert abs(pmf.sum() - 1) < 1e-9
    ref = binom.pmf(np.arange(k + 1), k, p)
    assert np.allclose(pmf, ref, rtol=1e-9, atol=1e-15)


def test_pmf_size_cutoff():
    with pytest.raises(SizeError):
        binomial_pmf(10_001, 0.5)
    with pytest.raises(SizeError):
        exact_binomial_g_expectation(20_000, 0.5)


def test_tail_examples():
    assert binomial_upper_tail(10, 0.3, 3) == pytest.approx(0.6172172136, abs=1e-10)
    assert binomial_upper_tail(1, 1.0, 1) == 1.0
    assert binomial_upper_tail(4, 0.25, 1) == pytest.approx(1 - 0.75 ** 4, abs=1e-15)


def test_exact_g_expectation_examples():
    assert exact_binomial_g_expectation(2, 0.5) == pytest.approx(0.5 * math.log(2), abs=1e-15)
    assert exact_binomial_g_expectation(1, 1.0) == 0.0
    assert exact_binomial_g_expectation(2, 0.5) >= g(1) + (1 - 0.5) / 3


def test_exact_g_expectation_matches_plain_sum():
    for k, p in [(7, 0.3), (60, 0.05), (300, 0.9)]:
        pmf = binom.pmf(np.arange(k + 1), k, p)
        direct = math.fsum(pmf[i] * g(i) for i in range(k + 1))
        assert exact_binomial_g_expectation(k, p) == pytest.approx(direct, rel=1e-11, abs=1e-12)


@pytest.mark.parametrize("k,p", [(10, 0.1), (100, 0.5), (1, 1.0), (37, 1 / 37)])
def test_g_drift_bounds_hold(k, p):
    rep = check_g_drift_bounds(k, p)
    assert rep.lb_holds and rep.ub_holds
    # the weaker (1-p)/3 floor follows from the sandwich once kp >= 1
    assert rep.excess >= (1 - p) / 3 - 1e-12


def test_g_drift_upper_slack_zero_at_p_one():
    rep = check_g_drift_bounds(1, 1.0)
    assert rep.slack_ub == 0.0
    assert rep.excess == 0.0
