"""The potential ``g(x) = x ln x`` and exact binomial oracles around it."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

ENUMERATION_CUTOFF = 10_000


class SizeError(ValueError):
    """Exact enumeration requested above the supported support size."""


def g(x: float) -> float:
    if x < 0:
        raise ValueError(f"g is defined on [0, inf), got {x}")
    if x == 0:
        return 0.0
    return x * math.log(x)


def taylor_upper(a: float, x: float) -> float:
    if a <= 0:
        raise ValueError("expansion point must be positive")
    d = x - a
    return a * math.log(a) + d * (1 + math.log(a)) + d * d / a


def taylor_lower(a: float, x: float) -> float:
    if a <= 0:
        raise ValueError("expansion point must be positive")
    d = x - a
    return a * math.log(a) + d * (1 + math.log(a)) + d * d / (2 * a) - d ** 3 / (6 * a * a)


@dataclass(frozen=True)
class MomentTriple:
    mean: float
    variance: float
    third_central: float


def binomial_central_moments(k: int, p: float) -> MomentTriple:
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    return MomentTriple(k * p, k * p * (1 - p), k * p * (1 - p) * (1 - 2 * p))


def binomial_pmf(k: int, p: float) -> np.ndarray:
    """Exact ``Pr[Bin(k, p) = i]`` for ``i = 0..k`` via log-space terms.

    The terms are renormalised to sum to one, which removes the common
    rounding drift of the log-gamma evaluation.
    """
    if k < 0 or not 0.0 <= p <= 1.0:
        raise ValueError("need k >= 0 and p in [0, 1]")
    if k > ENUMERATION_CUTOFF:
        raise SizeError(f"k={k} exceeds the enumeration cutoff {ENUMERATION_CUTOFF}")
    i = np.arange(k + 1)
    if p == 0.0 or p == 1.0:
        out = np.zeros(k + 1)
        out[0 if p == 0.0 else k] = 1.0
        return out
    logpmf = (gammaln(k + 1) - gammaln(i + 1) - gammaln(k - i + 1)
              + i * math.log(p) + (k - i) * math.log1p(-p))
    pmf = np.exp(logpmf)
    return pmf / math.fsum(pmf)


def binomial_upper_tail(k: int, p: float, t: int) -> float:
    """Exact ``Pr[Bin(k, p) >= t]``."""
    pmf = binomial_pmf(k, p)
    t = max(0, t)
    return math.fsum(pmf[t:]) if t <= k else 0.0


def _g_array(x: np.ndarray) -> np.ndarray:
    out = np.zeros(len(x), dtype=float)
    pos = x > 0
    out[pos] = x[pos] * np.log(x[pos])
    return out


def exact_binomial_g_excess(k: int, p: float) -> float:
    """``E[g(X)] - g(E[X])`` for ``X ~ Bin(k, p)``.

    Summing centred terms keeps the rounding error far below the slacks
    being certified, even for ``k`` in the hundreds.
    """
    pmf = binomial_pmf(k, p)
    mean = k * p
    i = np.arange(k + 1, dtype=float)
    # g(i) - g(mean), written to avoid cancellation near the mean
    if mean > 0:
        diff = (i - mean) * math.log(mean)
        pos = i > 0
        diff[pos] += i[pos] * np.log(i[pos] / mean)
    else:
        diff = _g_array(i)
    return math.fsum(pmf * diff)


def exact_binomial_g_expectation(k: int, p: float) -> float:
    """``E[g(X)]`` for ``X ~ Bin(k, p)`` by full enumeration of ``[0..k]``."""
    return g(k * p) + exact_binomial_g_excess(k, p)


@dataclass(frozen=True)
class GDriftReport:
    k: int
    p: float
    excess: float
    lower: float
    upper: float
    lb_holds: bool
    ub_holds: bool
    slack_lb: float
    slack_ub: float


def g_drift_window(k: int, p: float) -> tuple[float, float]:
    """Lower and upper limits for ``E[g(X)] - g(kp)``.

    Lower: ``(1-p)/2 - (1-p)(1-2p)/(6kp)``; upper: ``1-p``.
    """
    mean = k * p
    return (1 - p) / 2 - (1 - p) * (1 - 2 * p) / (6 * mean), 1 - p


def check_g_drift_bounds(k: int, p: float, tol: float = 1e-12) -> GDriftReport:
    """Certify the second-order sandwich on ``E[g(Bin(k, p))]`` by enumeration.

    Slacks are signed: positive means the inequality holds with room.
    """
    if not 0.0 < p <= 1.0 or k < 1:
        raise ValueError("need k >= 1 and p in (0, 1]")
    excess = exact_binomial_g_excess(k, p)
    lo, hi = g_drift_window(k, p)
    slack_lb = excess - lo
    slack_ub = hi - excess
    return GDriftReport(k, p, excess, lo, hi, slack_lb >= -tol, slack_ub >= -tol, slack_lb, slack_ub)
