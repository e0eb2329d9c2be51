"""Non-elitist population EAs on pseudo-Boolean benchmarks.

Populations are ``(lam, n)`` arrays of 0/1 bytes.  The scalar operators
(``select_*``, ``mutate_standard``) define the variation laws; the
``*_indices`` batch forms draw ``size`` independent parents from the same
laws and are what :func:`ea_generation` uses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ._stats import ProportionEstimate
from .bounds import (BoundReport, LevelModel, level_large_delta_bound, level_new_bound,
                     suggest_lambda)


class Selection(str, Enum):
    FITNESS_PROPORTIONATE = "fitness_proportionate"
    TOURNAMENT2 = "tournament2"
    RANKING_MU_COMMA = "ranking_mu_comma"


class Fitness(str, Enum):
    ONEMAX = "onemax"
    LEADINGONES = "leadingones"
    ONEMAX_PARTIAL = "onemax_partial"


@dataclass(frozen=True)
class EaConfig:
    n: int
    lam: int
    selection: Selection
    pmut: float
    fitness: Fitness = Fitness.ONEMAX
    mu: int | None = None
    c: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "selection", Selection(self.selection))
        object.__setattr__(self, "fitness", Fitness(self.fitness))
        if self.n < 1 or self.lam < 1:
            raise ValueError("need n >= 1 and lambda >= 1")
        if not 0.0 <= self.pmut <= 1.0:
            raise ValueError("pmut must lie in [0, 1]")
        if self.selection is Selection.RANKING_MU_COMMA:
            if self.mu is None or not 1 <= self.mu <= self.lam:
                raise ValueError("ranking selection needs 1 <= mu <= lambda")
        if self.fitness is Fitness.ONEMAX_PARTIAL:
            if self.c is None or not 1 / self.n < self.c < 1:
                raise ValueError("partial evaluation needs c in (1/n, 1)")

    def to_dict(self) -> dict:
        return {"n": self.n, "lam": self.lam, "selection": self.selection.value,
                "pmut": self.pmut, "fitness": self.fitness.value, "mu": self.mu, "c": self.c}

    @classmethod
    def from_dict(cls, d: dict) -> EaConfig:
        return cls(**d)


@dataclass
class RunRecord:
    generations: int
    evaluations: int
    hit: bool
    best_fitness_trace: list[int] | None = None
    level_trace: list[list[int]] | None = None

    def to_dict(self) -> dict:
        return {"generations": self.generations, "evaluations": self.evaluations, "hit": self.hit}


# fitness functions

def onemax(x) -> int:
    return int(np.count_nonzero(x))


def leadingones(x) -> int:
    x = np.asarray(x)
    zeros = np.flatnonzero(x == 0)
    return int(zeros[0]) if zeros.size else len(x)


def onemax_partial(x, c: float, rng: np.random.Generator) -> int:
    x = np.asarray(x)
    if not 1 / len(x) < c <= 1:
        raise ValueError("partial evaluation needs c in (1/n, 1]")
    mask = rng.random(len(x)) < c
    return int(np.count_nonzero(x.astype(bool) & mask))


def onemax_batch(pop: np.ndarray) -> np.ndarray:
    return pop.sum(axis=1, dtype=np.int64)


def leadingones_batch(pop: np.ndarray) -> np.ndarray:
    full = pop.all(axis=1)
    return np.where(full, pop.shape[1], np.argmin(pop, axis=1)).astype(np.int64)


def onemax_partial_batch(pop: np.ndarray, c: float, rng: np.random.Generator) -> np.ndarray:
    mask = rng.random(pop.shape) < c
    return (pop.astype(bool) & mask).sum(axis=1, dtype=np.int64)


def true_fitness(config: EaConfig, pop: np.ndarray) -> np.ndarray:
    if config.fitness is Fitness.LEADINGONES:
        return leadingones_batch(pop)
    return onemax_batch(pop)


def selection_fitness(config: EaConfig, pop: np.ndarray, rng) -> np.ndarray:
    """Fitness values seen by selection; partial evaluation draws fresh masks."""
    if config.fitness is Fitness.ONEMAX_PARTIAL:
        return onemax_partial_batch(pop, config.c, rng)
    return true_fitness(config, pop)


# selection

def select_fitness_proportionate(fitnesses, rng: np.random.Generator) -> int:
    f = np.asarray(fitnesses, dtype=float)
    if f.size == 0:
        raise ValueError("cannot select from an empty population")
    if (f < 0).any():
        raise ValueError("fitness-proportionate selection needs nonnegative fitness")
    total = f.sum()
    if total == 0:
        return int(rng.integers(f.size))
    u = rng.random() * total
    return int(min(np.searchsorted(np.cumsum(f), u, side="right"), f.size - 1))


def fitness_proportionate_indices(fitnesses, size: int, rng) -> np.ndarray:
    f = np.asarray(fitnesses, dtype=float)
    if (f < 0).any():
        raise ValueError("fitness-proportionate selection needs nonnegative fitness")
    total = f.sum()
    if total == 0:
        return rng.integers(f.size, size=size)
    u = rng.random(size) * total
    return np.minimum(np.searchsorted(np.cumsum(f), u, side="right"), f.size - 1)


def select_tournament2(fitnesses, rng: np.random.Generator) -> int:
    f = np.asarray(fitnesses)
    if f.size == 0:
        raise ValueError("cannot select from an empty population")
    a, b = rng.integers(f.size, size=2)
    if f[a] == f[b]:
        return int(a if rng.random() < 0.5 else b)
    return int(a if f[a] > f[b] else b)


def tournament2_indices(fitnesses, size: int, rng) -> np.ndarray:
    f = np.asarray(fitnesses)
    a = rng.integers(f.size, size=size)
    b = rng.integers(f.size, size=size)
    coin = rng.random(size) < 0.5
    fa, fb = f[a], f[b]
    return np.where(fa > fb, a, np.where(fb > fa, b, np.where(coin, a, b)))


def ranking_pool(fitnesses, mu: int, rng) -> np.ndarray:
    """Indices of the ``mu`` best, with ties at the cut broken uniformly."""
    f = np.asarray(fitnesses)
    if not 1 <= mu <= f.size:
        raise ValueError("need 1 <= mu <= population size")
    order = rng.permutation(f.size)
    ranked = order[np.argsort(-f[order], kind="stable")]
    return ranked[:mu]


def select_ranking_mu_comma(fitnesses, mu: int, rng: np.random.Generator) -> int:
    pool = ranking_pool(fitnesses, mu, rng)
    return int(pool[rng.integers(mu)])


def ranking_indices(fitnesses, mu: int, size: int, rng) -> np.ndarray:
    pool = ranking_pool(fitnesses, mu, rng)
    return pool[rng.integers(mu, size=size)]


# mutation

def mutate_standard(x, pmut: float, rng: np.random.Generator) -> np.ndarray:
    if not 0.0 <= pmut <= 1.0:
        raise ValueError("pmut must lie in [0, 1]")
    x = np.asarray(x, dtype=np.uint8)
    return x ^ (rng.random(x.shape) < pmut).astype(np.uint8)


def mutate_batch(pop: np.ndarray, pmut: float, rng: np.random.Generator) -> np.ndarray:
    """Standard bit mutation of every row.

    The flip set is drawn as a uniformly random subset whose size is
    ``Bin(lam*n, pmut)``, which is the same law as independent per-bit
    flips and much cheaper when ``pmut`` is tiny.
    """
    out = pop.copy()
    total = out.size
    flips = int(rng.binomial(total, pmut))
    if flips:
        where = rng.choice(total, size=flips, replace=False)
        flat = out.reshape(-1)
        flat[where] ^= 1
    return out


def parent_indices(config: EaConfig, fitnesses, size: int, rng) -> np.ndarray:
    if config.selection is Selection.FITNESS_PROPORTIONATE:
        return fitness_proportionate_indices(fitnesses, size, rng)
    if config.selection is Selection.TOURNAMENT2:
        return tournament2_indices(fitnesses, size, rng)
    return ranking_indices(fitnesses, config.mu, size, rng)


def ea_generation(config: EaConfig, population: np.ndarray, rng, fitnesses=None,
                  size: int | None = None) -> np.ndarray:
    """Create ``lam`` offspring, each by independent selection and mutation.

    ``fitnesses`` may carry cached selection fitness of ``population``;
    under partial evaluation it is always redrawn.
    """
    if fitnesses is None or config.fitness is Fitness.ONEMAX_PARTIAL:
        fitnesses = selection_fitness(config, population, rng)
    idx = parent_indices(config, fitnesses, config.lam if size is None else size, rng)
    return mutate_batch(population[idx], config.pmut, rng)


def random_population(config: EaConfig, rng) -> np.ndarray:
    return rng.integers(0, 2, size=(config.lam, config.n), dtype=np.uint8)


def level_occupancy(fitness_values, m: int) -> list[int]:
    """``|P ∩ A_{>=j}|`` for ``j = 1..m`` with ``A_i = {x : f(x) = i-1}``."""
    f = np.asarray(fitness_values)
    return [int(np.count_nonzero(f >= j - 1)) for j in range(1, m + 1)]


def ea_run(config: EaConfig, cap_generations: int, rng, *, trace: bool = False,
           levels: bool = False) -> RunRecord:
    """Run from a uniform random population until the optimum appears or the cap passes."""
    if cap_generations < 1:
        raise ValueError("cap must be at least 1")
    n = config.n
    pop = random_population(config, rng)
    best_trace = [] if trace else None
    level_trace = [] if levels else None
    for t in range(cap_generations + 1):
        true_f = true_fitness(config, pop)
        if trace:
            best_trace.append(int(true_f.max()))
        if levels:
            level_trace.append(level_occupancy(true_f, n + 1))
        if true_f.max() >= n:
            return RunRecord(t, config.lam * t, True, best_trace, level_trace)
        if t == cap_generations:
            break
        cached = None if config.fitness is Fitness.ONEMAX_PARTIAL else true_f
        pop = ea_generation(config, pop, rng, cached)
    return RunRecord(cap_generations, config.lam * cap_generations, False, best_trace, level_trace)


def estimate_level_params(config: EaConfig, population: np.ndarray, j: int, samples: int,
                          rng) -> ProportionEstimate:
    """Estimate ``Pr[y in A_{>=j+1}]`` = ``Pr[f(y) >= j]`` for ``y ~ D(P)``.

    Offspring are drawn in generation-sized batches so that partial
    evaluation redraws parent masks once per batch, as in a real run.
    """
    if samples < 1:
        raise ValueError("need at least one sample")
    population = np.asarray(population, dtype=np.uint8)
    hits = drawn = 0
    cached = None
    if config.fitness is not Fitness.ONEMAX_PARTIAL:
        cached = true_fitness(config, population)
    while drawn < samples:
        size = min(len(population), samples - drawn)
        kids = ea_generation(config, population, rng, cached, size=size)
        hits += int(np.count_nonzero(true_fitness(config, kids) >= j))
        drawn += size
    return ProportionEstimate(hits, drawn)


# level-model mappings for the supported selection schemes

def _copy_prob(config: EaConfig) -> float:
    return (1 - config.pmut) ** config.n


def _upgrade_probs(config: EaConfig) -> list[float]:
    """Lower bounds on reaching fitness ``>= i+1`` from a parent of fitness ``>= i``."""
    n, q = config.n, config.pmut
    copy = _copy_prob(config)
    one_flip = q * (1 - q) ** (n - 1)
    if config.fitness is Fitness.LEADINGONES:
        return [min(one_flip, copy)] * n
    return [min((n - i) * one_flip, copy) for i in range(n)]


@dataclass
class LevelMapping:
    model: LevelModel
    theorem: str
    notes: list[str] = field(default_factory=list)


def level_model_for(config: EaConfig, gamma0: float | None = None) -> LevelMapping:
    """Fitness-level model for an EA configuration, with ``o(1)`` terms made exact.

    Levels are ``A_i = {f = i-1}``, ``m = n+1``.  Partial evaluation is not
    mapped here because its selection advantage has an unquantified
    constant; use :func:`partial_eval_level_model` with an explicit one.
    """
    if config.fitness is Fitness.ONEMAX_PARTIAL:
        raise ValueError("partial evaluation needs an explicit advantage constant; "
                         "use partial_eval_level_model")
    n, lam = config.n, config.lam
    copy = _copy_prob(config)
    up = _upgrade_probs(config)
    if config.selection is Selection.FITNESS_PROPORTIONATE:
        g0 = 0.5 if gamma0 is None else gamma0
        delta = (1 + 1 / (2 * n)) * copy - 1
        z = [g0 / 4 * u for u in up]
        notes = ["parent floor gamma0/4", "growth advantage 1+1/(2n) times copy probability"]
        theorem = "level_new"
    elif config.selection is Selection.TOURNAMENT2:
        g0 = 0.5 if gamma0 is None else gamma0
        delta = (2 - g0) * copy - 1
        frac = g0 / 4
        z = [(1 - (1 - frac) ** 2) * u for u in up]
        notes = ["parent floor 1-(1-gamma0/4)^2", "growth advantage (2-gamma0) times copy probability"]
        theorem = "level_new"
    else:
        mu = config.mu
        g0 = mu / lam if gamma0 is None else gamma0
        delta = copy * min(lam / mu, 1 / g0) - 1
        theorem = "level_large_delta" if delta > 1 else "level_new"
        threshold = g0 * lam if theorem == "level_large_delta" else g0 * lam / 4
        z = [min(1.0, threshold / mu) * u for u in up]
        notes = ["growth advantage min(lambda/mu, 1/gamma0) times copy probability"]
    if delta <= 0:
        notes.append("no multiplicative advantage: delta <= 0")
        delta = max(delta, 1e-300)
    return LevelMapping(LevelModel(n + 1, tuple(z), delta, g0, lam), theorem, notes)


def partial_eval_level_model(n: int, c: float, a: float, lam: int) -> LevelModel:
    """Level model for 2-tournament on partially evaluated OneMax.

    ``delta = a*sqrt(c/n)`` with ``a`` the (empirically estimated)
    selection-advantage constant; ``z_j = 7(1-j/n)(delta/9)/16``.
    """
    delta = a * math.sqrt(c / n)
    z = tuple(7 * (1 - j / n) * (delta / 9) / 16 for j in range(n))
    return LevelModel(n + 1, z, delta, 0.5, lam)


def estimate_partial_advantage(n: int, c: float, lam: int, gamma: float, j: int,
                               samples: int, rng) -> tuple[float, ProportionEstimate]:
    """Empirical selection-advantage constant under partial evaluation.

    Builds a population with ``round(gamma*lam)`` strings of OneMax value
    ``j+1`` and the rest at ``j``, samples selected parents without
    mutation, and returns ``a = (phat/gamma - 1) / sqrt(c/n)`` together
    with the raw estimate of ``Pr[parent value >= j+1]``.
    """
    if not 0 <= j < n:
        raise ValueError("need 0 <= j < n")
    raised = int(round(gamma * lam))
    if not 0 < raised < lam:
        raise ValueError("gamma*lam must round to a value in (0, lam)")
    config = EaConfig(n, lam, Selection.TOURNAMENT2, 0.0, Fitness.ONEMAX_PARTIAL, c=c)
    pop = np.zeros((lam, n), dtype=np.uint8)
    pop[:, :j] = 1
    pop[:raised, j] = 1
    est = estimate_level_params(config, pop, j + 1, samples, rng)
    frac = raised / lam
    return (est.phat / frac - 1) / math.sqrt(c / n), est


def level_bound_for(config: EaConfig, gamma0: float | None = None) -> BoundReport:
    mapping = level_model_for(config, gamma0)
    if mapping.theorem == "level_large_delta":
        rep = level_large_delta_bound(mapping.model)
    else:
        rep = level_new_bound(mapping.model)
    rep.notes.extend(mapping.notes)
    return rep


def suggest_ea_lambda(config: EaConfig, gamma0: float | None = None) -> int | None:
    """Population size from the population-size fixed-point iteration, for lambda-independent z."""
    mapping = level_model_for(config, gamma0)
    return suggest_lambda(mapping.model, large_delta=mapping.theorem == "level_large_delta")
