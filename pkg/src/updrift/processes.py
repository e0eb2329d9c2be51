"""Reference up-drift processes and trajectory runners.

Every process is a Markov chain on the nonnegative integers (the
deterministic process on the reals) whose step law is fixed by a
:class:`ProcessSpec`.  Runners take an explicit ``numpy.random.Generator``
so that a trajectory is a pure function of ``(spec, seed)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import stats

DEFAULT_CAP = 10_000_000


class DomainError(ValueError):
    """A parameter lies outside the range where the step law is defined."""


class Kind(str, Enum):
    DETERMINISTIC = "deterministic"
    JACKPOT = "jackpot"
    BINOMIAL_CLAMPED = "binomial_clamped"
    BINOMIAL_WITH_ZERO = "binomial_with_zero"
    BINOMIAL_FRESH_START = "binomial_fresh_start"
    UNBIASED_BINOMIAL = "unbiased_binomial"

    @property
    def binomial(self) -> bool:
        return self not in (Kind.DETERMINISTIC, Kind.JACKPOT)


@dataclass(frozen=True)
class ZeroLaw:
    """Distribution of the successor of state 0.

    ``kind`` is one of ``"point"`` (mass 1 on ``value``), ``"binomial"``
    (``Bin(k, p)``) or ``"table"`` (``table[i]`` is the probability of
    state ``i``).
    """

    kind: str
    value: int = 0
    k: int = 0
    p: float = 0.0
    table: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind == "point":
            if self.value < 0:
                raise DomainError("point mass must sit on a nonnegative state")
        elif self.kind == "binomial":
            if self.k < 1 or not 0.0 <= self.p <= 1.0:
                raise DomainError("binomial zero law needs k >= 1 and p in [0, 1]")
        elif self.kind == "table":
            if not self.table or any(q < 0 for q in self.table):
                raise DomainError("tabulated zero law needs nonnegative probabilities")
            if abs(math.fsum(self.table) - 1.0) > 1e-9:
                raise DomainError("tabulated zero law must sum to 1")
        else:
            raise DomainError(f"unknown zero law kind {self.kind!r}")

    @classmethod
    def point(cls, value: int) -> ZeroLaw:
        return cls("point", value=value)

    @classmethod
    def binomial(cls, k: int, p: float) -> ZeroLaw:
        return cls("binomial", k=k, p=p)

    @classmethod
    def tabulated(cls, probs) -> ZeroLaw:
        return cls("table", table=tuple(float(q) for q in probs))

    def pmf(self) -> np.ndarray:
        """Probabilities of states ``0..support_max``."""
        if self.kind == "point":
            out = np.zeros(self.value + 1)
            out[self.value] = 1.0
            return out
        if self.kind == "binomial":
            return stats.binom.pmf(np.arange(self.k + 1), self.k, self.p)
        return np.asarray(self.table, dtype=float)

    def sample(self, rng: np.random.Generator) -> int:
        if self.kind == "point":
            return self.value
        if self.kind == "binomial":
            return int(rng.binomial(self.k, self.p))
        return int(rng.choice(len(self.table), p=self.table))

    def min_expectation(self, cap: float) -> float:
        """Exact ``E[min(Y, cap)]`` for ``Y`` drawn from this law."""
        probs = self.pmf()
        states = np.minimum(np.arange(len(probs)), cap)
        return math.fsum(probs * states)

    def to_dict(self) -> dict:
        if self.kind == "point":
            return {"kind": "point", "value": self.value}
        if self.kind == "binomial":
            return {"kind": "binomial", "k": self.k, "p": self.p}
        return {"kind": "table", "table": list(self.table)}

    @classmethod
    def from_dict(cls, d: dict) -> ZeroLaw:
        if d["kind"] == "table":
            return cls.tabulated(d["table"])
        return cls(**d)


@dataclass(frozen=True)
class FreshStart:
    """Start condition: every step reaches at least ``xmin`` with probability ``p``."""

    xmin: int
    p: float

    def __post_init__(self):
        if self.xmin < 1:
            raise DomainError("xmin must be a positive integer")
        if not 0.0 < self.p <= 1.0:
            raise DomainError("fresh-start probability must lie in (0, 1]")


def drift_threshold(delta: float, n: int, *, ceil: bool = True) -> float:
    """The phase threshold ``D0``.

    ``min(ceil(100/delta), n)`` for ``delta <= 1`` and ``min(32, n)``
    otherwise.  The start-high theorem uses ``100/delta`` without rounding,
    hence ``ceil=False``.
    """
    if delta <= 0:
        return n
    if delta <= 1:
        base = math.ceil(100 / delta) if ceil else 100 / delta
        return min(base, n)
    return min(32, n)


@dataclass(frozen=True)
class ProcessSpec:
    kind: Kind
    delta: float
    target_n: int
    k: int | None = None
    gamma0: float | None = None
    zero_law: ZeroLaw | None = None
    fresh_start: FreshStart | None = None
    x0: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        # the unbiased kind ignores delta
        if self.delta < 0 or (self.delta == 0 and self.kind is not Kind.UNBIASED_BINOMIAL):
            raise DomainError("delta must be positive")
        if self.target_n < 1:
            raise DomainError("target n must be a positive integer")
        if self.x0 < 0:
            raise DomainError("x0 must be nonnegative")
        if self.kind.binomial and (self.k is None or self.k < 1):
            raise DomainError(f"{self.kind.value} needs a positive k")
        if self.gamma0 is not None and not 0.0 < self.gamma0 < 1.0:
            raise DomainError("gamma0 must lie in (0, 1)")
        if self.kind is Kind.BINOMIAL_WITH_ZERO and self.zero_law is None:
            raise DomainError("binomial_with_zero needs a zero law")
        if self.kind is Kind.BINOMIAL_FRESH_START and self.fresh_start is None:
            raise DomainError("binomial_fresh_start needs a fresh-start law")
        if self.kind is Kind.JACKPOT and self.target_n > 1 and self.delta > self.target_n - 1:
            raise DomainError("jackpot success probability delta/(n-1) exceeds 1")
        if self.kind in (Kind.BINOMIAL_CLAMPED, Kind.UNBIASED_BINOMIAL) and self.x0 == 0:
            raise DomainError(f"{self.kind.value} lives on the positive integers")

    @property
    def d0(self) -> float:
        return drift_threshold(self.delta, self.target_n,
                               ceil=self.kind is not Kind.BINOMIAL_FRESH_START)

    def violations(self) -> list[str]:
        """Named theorem preconditions this spec does not satisfy."""
        out = []
        if not self.kind.binomial:
            return out
        n, k = self.target_n, self.k
        growth = 1.0 if self.kind is Kind.UNBIASED_BINOMIAL else 1.0 + self.delta
        if n - 1 > k / growth:
            out.append("n-1 <= k/(1+delta)")
        if self.gamma0 is not None and n - 1 > self.gamma0 * k:
            out.append("n-1 <= gamma0*k")
        if self.fresh_start is not None and self.fresh_start.xmin < self.d0:
            out.append("xmin >= D0")
        return out

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "delta": self.delta,
            "target_n": self.target_n,
            "k": self.k,
            "gamma0": self.gamma0,
            "zero_law": None if self.zero_law is None else self.zero_law.to_dict(),
            "fresh_start": None if self.fresh_start is None
            else {"xmin": self.fresh_start.xmin, "p": self.fresh_start.p},
            "x0": self.x0,
        }

    @classmethod
    def from_dict(cls, d: dict) -> ProcessSpec:
        d = dict(d)
        if d.get("zero_law") is not None:
            d["zero_law"] = ZeroLaw.from_dict(d["zero_law"])
        if d.get("fresh_start") is not None:
            d["fresh_start"] = FreshStart(**d["fresh_start"])
        return cls(**d)


@dataclass
class Trajectory:
    states: list
    hit_time: int | None
    censored: bool


@dataclass
class ReturnWatchRecord:
    reached_hi: bool
    returned_lo: bool
    hi_threshold: int
    lo_threshold: int
    degenerate: bool = False
    censored: bool = False


def _success_prob(spec: ProcessSpec, state: int) -> float:
    growth = 1.0 if spec.kind is Kind.UNBIASED_BINOMIAL else 1.0 + spec.delta
    p = growth * state / spec.k
    if p > 1.0:
        raise DomainError(
            f"success probability {p:.6g} > 1 at state {state}: "
            f"the binomial condition needs state <= k/(1+delta) = {spec.k / growth:.6g}"
        )
    return p


def make_stepper(spec: ProcessSpec):
    """Return ``step(state, rng)`` specialised to ``spec.kind``."""
    kind, delta, n, k = spec.kind, spec.delta, spec.target_n, spec.k

    if kind is Kind.DETERMINISTIC:
        factor = 1.0 + delta

        def step(state, rng):
            return factor * state

    elif kind is Kind.JACKPOT:
        q = delta / (n - 1) if n > 1 else 1.0

        def step(state, rng):
            return n if rng.random() < q else 1

    elif kind in (Kind.BINOMIAL_CLAMPED, Kind.UNBIASED_BINOMIAL):

        def step(state, rng):
            return max(1, int(rng.binomial(k, _success_prob(spec, state))))

    elif kind is Kind.BINOMIAL_WITH_ZERO:
        zero_law = spec.zero_law

        def step(state, rng):
            if state == 0:
                return zero_law.sample(rng)
            return int(rng.binomial(k, _success_prob(spec, state)))

    else:
        xmin, p_start = spec.fresh_start.xmin, spec.fresh_start.p

        def step(state, rng):
            fresh = xmin if rng.random() < p_start else 0
            grown = int(rng.binomial(k, _success_prob(spec, state))) if state > 0 else 0
            return max(grown, fresh)

    return step


def step(spec: ProcessSpec, state, rng: np.random.Generator):
    """Sample one successor of ``state``."""
    if state < 0:
        raise DomainError("states are nonnegative")
    if state == 0 and spec.kind in (Kind.BINOMIAL_CLAMPED, Kind.UNBIASED_BINOMIAL):
        raise DomainError(f"{spec.kind.value} is not defined at state 0")
    return make_stepper(spec)(state, rng)


def run_to_target(spec: ProcessSpec, cap: int = DEFAULT_CAP, rng=None,
                  *, record: bool = True) -> Trajectory:
    """Iterate until the state reaches ``target_n`` or ``cap`` steps pass.

    With ``record=False`` only the initial and final states are kept,
    which is what Monte Carlo estimation needs.
    """
    if cap < 1:
        raise ValueError("cap must be at least 1")
    n = spec.target_n
    x = spec.x0
    states = [x]
    if x >= n:
        return Trajectory(states, 0, False)
    advance = make_stepper(spec)
    for t in range(1, cap + 1):
        x = advance(x, rng)
        if record:
            states.append(x)
        if x >= n:
            if not record:
                states.append(x)
            return Trajectory(states, t, False)
    if not record:
        states.append(x)
    return Trajectory(states, None, True)


def hitting_time(spec: ProcessSpec, cap: int, rng) -> int | None:
    """Hitting time of ``target_n``, or ``None`` when censored at ``cap``."""
    return run_to_target(spec, cap, rng, record=False).hit_time


def run_with_return_watch(spec: ProcessSpec, hi: int, lo: int,
                          cap: int = DEFAULT_CAP, rng=None) -> ReturnWatchRecord:
    """Watch for a visit to ``>= hi`` followed by a later visit to ``<= lo``.

    The run ends on hitting ``target_n``, on a return, or at ``cap``.
    ``hi == target_n`` is the degenerate case where reaching ``hi`` ends
    the run, so a return is impossible; it is flagged.
    """
    n = spec.target_n
    if not lo < hi <= n:
        raise ValueError("return watch needs lo < hi <= n")
    record = ReturnWatchRecord(False, False, hi, lo, degenerate=hi >= n)
    x = spec.x0
    if x >= hi:
        record.reached_hi = True
    if x >= n:
        return record
    advance = make_stepper(spec)
    for _ in range(cap):
        x = advance(x, rng)
        if record.reached_hi and x <= lo:
            record.returned_lo = True
            return record
        if x >= hi:
            record.reached_hi = True
        if x >= n:
            return record
    record.censored = True
    return record


def dip_horizon(delta: float) -> int:
    return math.ceil(3 / delta)


def run_dip_watch(spec: ProcessSpec, D: int, rng) -> bool:
    """Start at ``D``; report whether the state falls to the linear floor.

    The floor at step ``s`` is ``D/2 + s*delta*D/2``.  The watch runs to
    ``min(T, ceil(3/delta))`` inclusive, where ``T`` is the first time the
    state reaches ``min(n, 2D)``.
    """
    delta = spec.delta
    target = min(spec.target_n, 2 * D)
    horizon = dip_horizon(delta)
    advance = make_stepper(spec)
    x = D
    for s in range(horizon + 1):
        if x <= D / 2 + s * delta * D / 2:
            return True
        if x >= target or s == horizon:
            return False
        x = advance(x, rng)
    return False


def climb_window(n: int, D: int, delta: float) -> int:
    if D >= n:
        return 0
    return math.ceil(math.log2(n / D)) * math.ceil(3 / delta)


def run_climb_watch(spec: ProcessSpec, D: int, rng) -> bool:
    """Start at ``D``; report whether ``target_n`` is reached within the climb window."""
    n = spec.target_n
    if D >= n:
        return True
    advance = make_stepper(spec)
    x = D
    for _ in range(climb_window(n, D, spec.delta)):
        x = advance(x, rng)
        if x >= n:
            return True
    return False


def with_start(spec: ProcessSpec, x0: int) -> ProcessSpec:
    return ProcessSpec(**{**spec.__dict__, "x0": x0})


__all__ = [
    "DEFAULT_CAP", "DomainError", "Kind", "ZeroLaw", "FreshStart", "ProcessSpec",
    "Trajectory", "ReturnWatchRecord", "drift_threshold", "make_stepper", "step",
    "run_to_target", "hitting_time", "run_with_return_watch", "run_dip_watch",
    "run_climb_watch", "climb_window", "dip_horizon", "with_start",
]
