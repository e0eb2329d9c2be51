"""Closed-form hitting-time and run-time bounds.

Each calculator returns a :class:`BoundReport`.  Violated hypotheses never
raise: the bound is still evaluated and the report is marked invalid, so
sweeps can chart where a theorem applies.  Only inputs for which the
formula itself is undefined (for example ``E0 <= 0``) raise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

RETURN_PROB_SMALL_DELTA = 0.7218
RETURN_PROB_LARGE_DELTA = 1 / (math.e * (math.e - 1))
CLIMB_FLOOR = 0.2782
C1 = 80_000
DIP_DENOMINATOR = 169


@dataclass
class BoundReport:
    theorem_id: str
    inputs: dict
    bound: float
    unit: str = "iterations"
    violated_preconditions: list[str] = field(default_factory=list)
    auxiliary: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.violated_preconditions

    def to_dict(self) -> dict:
        return {
            "theorem_id": self.theorem_id,
            "inputs": dict(self.inputs),
            "bound": self.bound,
            "unit": self.unit,
            "valid": self.valid,
            "violated_preconditions": list(self.violated_preconditions),
            "auxiliary": dict(self.auxiliary),
            "notes": list(self.notes),
        }


def log0(x: float, base: float) -> float:
    """``max(0, log_base(x))``."""
    if x <= 1:
        return 0.0
    return max(0.0, math.log(x) / math.log(base))


def ceil_log(x: float, base: float) -> int:
    """``ceil(log_base(x))`` that is exact when ``x`` is a power of ``base``."""
    if x <= 0:
        raise ValueError("logarithm of a nonpositive number")
    v = math.log(x) / math.log(base)
    r = round(v)
    if abs(v - r) < 1e-9 and math.isclose(base ** r, x, rel_tol=1e-12):
        return int(r)
    return math.ceil(v)


def ceil_log0(x: float, base: float) -> int:
    return max(0, ceil_log(x, base)) if x > 0 else 0


def _d0(delta: float, n: float) -> float:
    return min(math.ceil(100 / delta), n) if delta <= 1 else min(32, n)


def _updrift_conditions(n: int, k: int, delta: float, gamma0: float | None) -> list[str]:
    out = []
    if gamma0 is not None:
        if gamma0 >= 1:
            out.append("gamma0 < 1")
        elif n - 1 > gamma0 * k:
            out.append("n-1 <= gamma0*k")
    if n - 1 > k / (1 + delta):
        out.append("n-1 <= k/(1+delta)")
    return out


def _first_updrift_value(delta: float, n: int, gamma0: float) -> tuple[float, dict]:
    if delta <= 1:
        d0 = _d0(delta, n)
        head = 21.6 / (1 - gamma0) * d0 * math.log(2 * d0) if gamma0 < 1 else math.inf
        value = head + 3.6 * math.log2(n) * math.ceil(3 / delta)
        aux = {"D0": d0, "phase_success_prob": CLIMB_FLOOR}
        if n > 100 / delta:
            aux.update(return_probability=RETURN_PROB_SMALL_DELTA,
                       return_hi=100 / delta, return_lo=50 / delta)
        return value, aux
    value = 2.6 * math.log(n) / math.log(1 + delta) + 81
    aux = {"D0": _d0(delta, n), "return_probability": RETURN_PROB_LARGE_DELTA,
           "return_hi": 32, "return_lo": 31}
    return value, aux


def thm1_bound(delta: float, n: int, gamma0: float, k: int) -> BoundReport:
    """Expected hitting time of ``n`` for a positive process dominating ``Bin(k, (1+delta)x/k)``."""
    if n < 1 or k < 1 or delta <= 0:
        raise ValueError("need n, k >= 1 and delta > 0")
    value, aux = _first_updrift_value(delta, n, gamma0)
    rep = BoundReport("thm1", {"delta": delta, "n": n, "gamma0": gamma0, "k": k}, value,
                      violated_preconditions=_updrift_conditions(n, k, delta, gamma0),
                      auxiliary=aux)
    if n == 1:
        rep.notes.append("degenerate target: any positive start already hits n=1")
    return rep


def nodrift_bound(D0: int, gamma0: float, k: int | None = None) -> BoundReport:
    """Time to reach ``D0`` for an unbiased binomial process, via the potential ``x ln x``."""
    if D0 < 1:
        raise ValueError("D0 must be at least 1")
    inputs = {"D0": D0, "gamma0": gamma0, "k": k}
    violated = []
    if gamma0 >= 1:
        violated.append("gamma0 < 1")
    if k is not None and D0 - 1 > gamma0 * k:
        violated.append("D0-1 <= gamma0*k")
    if D0 == 1:
        return BoundReport("nodrift", inputs, 0.0, violated_preconditions=violated,
                           notes=["degenerate: D0=1 is hit at time 0"])
    value = 6 * D0 * math.log(2 * D0) / (1 - gamma0) if gamma0 < 1 else math.inf
    return BoundReport("nodrift", inputs, value, violated_preconditions=violated,
                       auxiliary={"expected_final_potential": 2 * D0 * math.log(2 * D0),
                                  "potential_drift": (1 - gamma0) / 3})


def thm2_bound(delta: float, n: int, gamma0: float, k: int, E0: float) -> BoundReport:
    """Hitting time when state 0 is reachable and left with ``E[min(X', D0)] >= E0``."""
    if E0 <= 0:
        raise ValueError("E0 must be positive")
    if n < 1 or k < 1 or delta <= 0:
        raise ValueError("need n, k >= 1 and delta > 0")
    rest, aux = _first_updrift_value(delta, n, gamma0)
    if delta <= 1:
        d0 = _d0(delta, n)
        zero_cost = 4 * d0 / (CLIMB_FLOOR * E0)
    else:
        zero_cost = 128 / (0.78 * E0)
    aux = {**aux, "zero_state_cost": zero_cost, "E0": E0}
    return BoundReport("thm2", {"delta": delta, "n": n, "gamma0": gamma0, "k": k, "E0": E0},
                       zero_cost + rest,
                       violated_preconditions=_updrift_conditions(n, k, delta, gamma0),
                       auxiliary=aux)


def thm3_bound(delta: float, n: int, k: int, xmin: int, p: float) -> BoundReport:
    """Hitting time when every step restarts at ``>= xmin`` with probability ``p``."""
    if not 0 < p <= 1:
        raise ValueError("p must lie in (0, 1]")
    d0 = min(100 / delta, n) if delta <= 1 else min(32, n)
    violated = _updrift_conditions(n, k, delta, None)
    if xmin < d0:
        violated.append("xmin >= D0")
    if delta <= 1:
        value = 3.6 * (1 / p + ceil_log0(n / xmin, 2) * math.ceil(3 / delta))
    else:
        value = 1.3 / p + 2.6 * ceil_log0(n / xmin, 1 + delta)
    return BoundReport("thm3", {"delta": delta, "n": n, "k": k, "xmin": xmin, "p": p}, value,
                       violated_preconditions=violated, auxiliary={"D0": d0})


def additive_overshoot_bound(x0: float, expected_final: float, drift: float) -> float:
    """Additive drift with overshooting: ``(E[X_T] - x0) / drift``."""
    if drift <= 0:
        raise ValueError("drift must be positive")
    if expected_final < x0:
        raise ValueError("expected final value lies below the start")
    return (expected_final - x0) / drift


def dip_bound(delta: float, D: int, n: int | None = None) -> BoundReport:
    """Probability of falling to the linear floor ``D/2 + s*delta*D/2`` within ``ceil(3/delta)`` steps."""
    violated = []
    if delta > 1:
        violated.append("delta <= 1")
    if D < 100 / delta:
        violated.append("D >= 100/delta")
    if n is not None and D >= n:
        violated.append("D < n")
    return BoundReport("dip", {"delta": delta, "D": D, "n": n},
                       math.exp(-delta * D / DIP_DENOMINATOR), unit="probability",
                       violated_preconditions=violated)


def climb_floor(delta: float, D: int, n: int | None = None) -> BoundReport:
    """Lower bound on reaching ``n`` from ``D`` within ``ceil(log2(n/D)) * ceil(3/delta)`` steps."""
    violated = []
    if delta > 1:
        violated.append("delta <= 1")
    if D < 100 / delta:
        violated.append("D >= 100/delta")
    x = delta * D / DIP_DENOMINATOR
    tail = 1 - 1 / math.expm1(x) if x < 700 else 1.0
    notes = []
    if n is not None and D >= n:
        notes.append("D >= n: success is immediate")
    return BoundReport("climb", {"delta": delta, "D": D, "n": n}, max(CLIMB_FLOOR, tail),
                       unit="probability", violated_preconditions=violated, notes=notes)


@dataclass(frozen=True)
class LevelModel:
    """Level partition data for the level-based theorems.

    ``z[j-1]`` is the upgrade probability floor of level ``j``, for
    ``j = 1..m-1``.
    """

    m: int
    z: tuple[float, ...]
    delta: float
    gamma0: float
    lam: int

    def __post_init__(self):
        object.__setattr__(self, "z", tuple(float(v) for v in self.z))
        if self.m < 1:
            raise ValueError("need at least one level")
        if self.m >= 2 and not self.z:
            raise ValueError("m >= 2 needs upgrade probabilities z_1..z_{m-1}")
        if len(self.z) != self.m - 1:
            raise ValueError(f"expected {self.m - 1} upgrade probabilities, got {len(self.z)}")
        if self.lam < 1 or self.delta <= 0:
            raise ValueError("need lambda >= 1 and delta > 0")

    @property
    def gamma0_lambda(self) -> float:
        return self.gamma0 * self.lam

    def with_lambda(self, lam: int) -> LevelModel:
        return LevelModel(self.m, self.z, self.delta, self.gamma0, lam)

    def common_violations(self) -> list[str]:
        out = []
        if any(not 0 < v <= 1 for v in self.z):
            out.append("z_j in (0,1]")
        if not 0 < self.gamma0 <= 1 / (1 + self.delta) + 1e-15:
            out.append("gamma0 <= 1/(1+delta)")
        if abs(self.gamma0_lambda - round(self.gamma0_lambda)) > 1e-9:
            out.append("gamma0*lambda integral")
        return out

    def to_dict(self) -> dict:
        return {"m": self.m, "z": list(self.z), "delta": self.delta,
                "gamma0": self.gamma0, "lam": self.lam}


def _new_t0(model: LevelModel, lam: float) -> tuple[float, float]:
    delta, g0 = model.delta, model.gamma0
    d0 = min(math.ceil(100 / delta), g0 * lam)
    logs = math.fsum(log0(2 * g0 * lam / (1 + zj * lam / d0), 2) for zj in model.z)
    inv = math.fsum(1 / zj for zj in model.z)
    t0 = 1e4 / delta * (model.m + logs / (1 - g0) + inv / lam)
    return d0, t0


def _new_lambda_min(model: LevelModel, lam: float) -> float:
    _, t0 = _new_t0(model, lam)
    return 338 / (model.gamma0 * model.delta) * math.log(8 * t0)


def level_new_bound(model: LevelModel) -> BoundReport:
    """Expected evaluations to reach the top level, for ``delta <= 1``."""
    violated = model.common_violations()
    if model.delta > 1:
        violated.append("delta <= 1")
    d0, t0 = _new_t0(model, model.lam)
    lam_min = _new_lambda_min(model, model.lam)
    if model.lam < lam_min:
        violated.append("population size: lambda >= 338/(gamma0*delta)*ln(8*t0)")
    return BoundReport("level_new", model.to_dict(), 8 * model.lam * t0, unit="evaluations",
                       violated_preconditions=violated,
                       auxiliary={"D0": d0, "t0": t0, "lambda_min": lam_min, "c1": C1})


def _large_t0(model: LevelModel, lam: float) -> tuple[float, float]:
    g0 = model.gamma0
    d0 = min(32, g0 * lam)
    logs = math.fsum(log0(2 * g0 * lam / (1 + zj * lam / d0), 1 + model.delta) for zj in model.z)
    inv = math.fsum(1 / zj for zj in model.z)
    return d0, 101.6 * model.m + 2.6 * logs + 657 / lam * inv


def _large_lambda_min(model: LevelModel, lam: float) -> float:
    _, t0 = _large_t0(model, lam)
    return 4 / model.gamma0 * math.log(9 * t0)


def level_large_delta_bound(model: LevelModel) -> BoundReport:
    """Expected evaluations to reach the top level, for ``delta > 1``."""
    violated = model.common_violations()
    if model.delta <= 1:
        violated.append("delta > 1")
    if model.gamma0_lambda < 32 - 1e-9:
        violated.append("gamma0*lambda >= 32")
    d0, t0 = _large_t0(model, model.lam)
    lam_min = _large_lambda_min(model, model.lam)
    if model.lam < lam_min:
        violated.append("population size: lambda >= 4/gamma0*ln(9*t0)")
    return BoundReport("level_large_delta", model.to_dict(), 9 * model.lam * t0,
                       unit="evaluations", violated_preconditions=violated,
                       auxiliary={"D0": d0, "t0": t0, "lambda_min": lam_min})


def level_old_bound(model: LevelModel) -> BoundReport:
    """The earlier level-based bound with quadratic dependence on ``1/delta``."""
    delta, lam, g0 = model.delta, model.lam, model.gamma0
    violated = []
    if not 0 < delta <= 1:
        violated.append("delta in (0,1]")
    if not 0 < g0 < 1:
        violated.append("gamma0 in (0,1)")
    if any(not 0 < v <= 1 for v in model.z):
        violated.append("z_j in (0,1]")
    terms = [math.log(6 * delta * lam / (4 + zj * delta * lam)) + 1 / (lam * zj) for zj in model.z]
    value = 8 * lam / delta ** 2 * math.fsum(terms)
    aux = {}
    if model.z:
        zstar = min(model.z)
        lam_min = 4 / (g0 * delta ** 2) * math.log(128 * model.m / (zstar * delta ** 2))
        aux["lambda_min"] = lam_min
        if lam < lam_min:
            violated.append("population size: lambda >= 4/(gamma0*delta^2)*ln(128m/(z*delta^2))")
    return BoundReport("level_old", model.to_dict(), value, unit="evaluations",
                       violated_preconditions=violated, auxiliary=aux)


def compare_level_bounds(model: LevelModel) -> dict:
    new, old = level_new_bound(model), level_old_bound(model)
    return {"new": new.bound, "old": old.bound, "ratio_new_over_old": new.bound / old.bound,
            "lambda_min_new": new.auxiliary["lambda_min"],
            "lambda_min_old": old.auxiliary.get("lambda_min")}


def _lambda_step(gamma0: float) -> int:
    """Smallest positive integer ``q`` with ``gamma0 * q`` integral."""
    return Fraction(gamma0).limit_denominator(10 ** 6).denominator


def suggest_lambda(model: LevelModel, *, large_delta: bool | None = None,
                   max_iter: int = 100) -> int | None:
    """Iterate ``lambda -> lambda_min(lambda)`` towards a feasible population size.

    Returns the first iterate satisfying the population-size condition with ``gamma0*lambda``
    integral, or ``None`` when the iteration diverges or 100 iterations do not settle.
    """
    if large_delta is None:
        large_delta = model.delta > 1
    lam_min_of = _large_lambda_min if large_delta else _new_lambda_min
    q = _lambda_step(model.gamma0)
    lam = max(q, math.ceil(model.lam / q) * q)
    if large_delta:
        lam = max(lam, math.ceil(32 / model.gamma0 / q) * q)
    for _ in range(max_iter):
        need = lam_min_of(model, lam)
        if not math.isfinite(need):
            return None
        if lam >= need:
            return lam
        lam = math.ceil(need / q) * q
    return None
