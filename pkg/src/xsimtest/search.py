"""NSGA-II over the five-gene scenario space, plus a random-search baseline.

Search runs in the canonical frame. The evaluator is any callable mapping a
:class:`~xsimtest.scene.TestInput` to something exposing ``.objectives``
(usually a :class:`~xsimtest.fitness.ScenarioOutcome`) or to a plain
sequence of objective values. All objectives are minimised.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .scene import InputSpace, TestInput, clamp, sample_uniform


class BudgetError(ValueError):
    pass


@dataclass(frozen=True)
class SearchConfig:
    population_size: int = 10
    crossover_rate: float = 0.9
    mutation_rate: float = 0.5
    eta: float = 20.0
    sigma_fraction: float = 0.1
    budget: int = 300
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.crossover_rate <= 1.0 and 0.0 <= self.mutation_rate <= 1.0):
            raise ValueError("crossover and mutation rates must lie in [0, 1]")
        if self.population_size < 2 or self.population_size % 2:
            raise ValueError("population size must be even and at least 2")
        if self.eta < 0 or self.sigma_fraction < 0:
            raise ValueError("eta and sigma_fraction must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Individual:
    input: TestInput
    outcome: Any
    rank: int = 0
    crowding: float = 0.0

    @property
    def objectives(self) -> tuple[float, ...]:
        return objectives_of(self.outcome)


@dataclass
class RunResult:
    algorithm: str
    seed: int
    config: SearchConfig
    front: list[Individual]
    population: list[Individual]
    evaluated: list[Individual]
    history: list[list[tuple[float, ...]]] = field(default_factory=list)


def objectives_of(outcome) -> tuple[float, ...]:
    objs = getattr(outcome, "objectives", outcome)
    return tuple(float(v) for v in objs)


def dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    """Pareto dominance for minimisation."""
    strictly = False
    for x, y in zip(a, b):
        if x > y:
            return False
        if x < y:
            strictly = True
    return strictly


def fast_nondominated_sort(objectives: Sequence[Sequence[float]]) -> list[list[int]]:
    """Partition indices into successive non-dominated fronts (Deb et al.)."""
    n = len(objectives)
    dominated_by: list[list[int]] = [[] for _ in range(n)]
    counts = [0] * n
    fronts: list[list[int]] = [[]]
    for p in range(n):
        for q in range(n):
            if p == q:
                continue
            if dominates(objectives[p], objectives[q]):
                dominated_by[p].append(q)
            elif dominates(objectives[q], objectives[p]):
                counts[p] += 1
        if counts[p] == 0:
            fronts[0].append(p)
    i = 0
    while fronts[i]:
        nxt = []
        for p in fronts[i]:
            for q in dominated_by[p]:
                counts[q] -= 1
                if counts[q] == 0:
                    nxt.append(q)
        i += 1
        fronts.append(sorted(nxt))
    return fronts[:-1]


def crowding_distance(objectives: Sequence[Sequence[float]]) -> list[float]:
    """Crowding distance of each member of one front.

    Boundary members of every objective get ``math.inf``; interior members
    accumulate the normalised gap between their neighbours.
    """
    n = len(objectives)
    if n == 0:
        return []
    if n <= 2:
        return [math.inf] * n
    f = np.asarray(objectives, dtype=float)
    dist = np.zeros(n)
    for m in range(f.shape[1]):
        order = np.argsort(f[:, m], kind="stable")
        lo, hi = f[order[0], m], f[order[-1], m]
        dist[order[0]] = dist[order[-1]] = np.inf
        if hi == lo:
            continue
        gaps = (f[order[2:], m] - f[order[:-2], m]) / (hi - lo)
        dist[order[1:-1]] += gaps
    return [float(d) for d in dist]


def assign_rank_and_crowding(population: list[Individual]) -> list[list[int]]:
    objs = [ind.objectives for ind in population]
    fronts = fast_nondominated_sort(objs)
    for r, front in enumerate(fronts):
        cd = crowding_distance([objs[i] for i in front])
        for i, d in zip(front, cd):
            population[i].rank = r
            population[i].crowding = d
    return fronts


def _better(a: Individual, b: Individual) -> Individual | None:
    if a.rank != b.rank:
        return a if a.rank < b.rank else b
    if a.crowding != b.crowding:
        return a if a.crowding > b.crowding else b
    return None


def binary_tournament(population: list[Individual], rng: np.random.Generator) -> Individual:
    i, j = rng.integers(len(population), size=2)
    a, b = population[i], population[j]
    if i == j:
        return a
    winner = _better(a, b)
    if winner is None:
        winner = a if rng.random() < 0.5 else b
    return winner


def sbx_crossover(
    p1: TestInput,
    p2: TestInput,
    eta: float,
    rng: np.random.Generator,
    space: InputSpace | None = None,
) -> tuple[TestInput, TestInput]:
    """Simulated binary crossover applied to every gene.

    For a uniform draw ``u`` the spread factor is ``(2u)^(1/(eta+1))`` when
    ``u <= 0.5`` and ``(1/(2(1-u)))^(1/(eta+1))`` otherwise; the children
    ``0.5[(1+b)p1 + (1-b)p2]`` and ``0.5[(1-b)p1 + (1+b)p2]`` are then clamped
    to ``space``.
    """
    x1, x2 = p1.as_array(), p2.as_array()
    u = rng.random(x1.shape[0])
    expo = 1.0 / (eta + 1.0)
    with np.errstate(divide="ignore"):
        beta = np.where(u <= 0.5, (2.0 * u) ** expo, (1.0 / (2.0 * (1.0 - u))) ** expo)
    # midpoint form of the same formula: exact for identical parents
    mid, half = 0.5 * (x1 + x2), 0.5 * beta * (x1 - x2)
    c1, c2 = mid + half, mid - half
    space = space or InputSpace()
    return clamp(TestInput.from_array(c1), space), clamp(TestInput.from_array(c2), space)


def gaussian_mutation(
    child: TestInput,
    rate: float,
    sigma: Sequence[float] | np.ndarray,
    rng: np.random.Generator,
    space: InputSpace | None = None,
) -> TestInput:
    x = child.as_array()
    mask = rng.random(x.shape[0]) < rate
    shift = rng.normal(0.0, 1.0, x.shape[0]) * np.asarray(sigma, dtype=float)
    return clamp(TestInput.from_array(np.where(mask, x + shift, x)), space or InputSpace())


def _expired(deadline: float | None) -> bool:
    return deadline is not None and time.monotonic() > deadline


def _front_snapshot(population: list[Individual]) -> list[tuple[float, ...]]:
    return [ind.objectives for ind in population if ind.rank == 0]


def _select(combined: list[Individual], size: int) -> list[Individual]:
    fronts = assign_rank_and_crowding(combined)
    survivors: list[Individual] = []
    for front in fronts:
        members = [combined[i] for i in front]
        if len(survivors) + len(members) <= size:
            survivors.extend(members)
            continue
        members.sort(key=lambda ind: -ind.crowding)
        survivors.extend(members[: size - len(survivors)])
        break
    assign_rank_and_crowding(survivors)
    return survivors


def nsga2_run(
    cfg: SearchConfig,
    evaluator: Callable[[TestInput], Any],
    rng: np.random.Generator,
    space: InputSpace | None = None,
    deadline: float | None = None,
) -> RunResult:
    """Generational NSGA-II with (mu + lambda) survival.

    Stops once ``cfg.budget`` evaluations are spent or, when ``deadline``
    (a :func:`time.monotonic` value) is given, once it has passed.
    """
    space = space or InputSpace()
    n = cfg.population_size
    if cfg.budget < n:
        raise BudgetError(f"budget {cfg.budget} is smaller than the population size {n}")
    sigma = cfg.sigma_fraction * space.widths()

    population = []
    for _ in range(n):
        x = sample_uniform(space, rng)
        population.append(Individual(x, evaluator(x)))
    evaluated = list(population)
    assign_rank_and_crowding(population)
    history = [_front_snapshot(population)]

    while len(evaluated) < cfg.budget and not _expired(deadline):
        n_off = min(n, cfg.budget - len(evaluated))
        children: list[TestInput] = []
        while len(children) < n_off:
            a = binary_tournament(population, rng).input
            b = binary_tournament(population, rng).input
            if rng.random() < cfg.crossover_rate:
                a, b = sbx_crossover(a, b, cfg.eta, rng, space)
            children.append(gaussian_mutation(a, cfg.mutation_rate, sigma, rng, space))
            children.append(gaussian_mutation(b, cfg.mutation_rate, sigma, rng, space))
        offspring = [Individual(x, evaluator(x)) for x in children[:n_off]]
        evaluated.extend(offspring)
        population = _select(population + offspring, n)
        history.append(_front_snapshot(population))

    front = [ind for ind in population if ind.rank == 0]
    return RunResult("nsga2", cfg.seed, cfg, front, population, evaluated, history)


def random_search_run(
    cfg: SearchConfig,
    evaluator: Callable[[TestInput], Any],
    rng: np.random.Generator,
    space: InputSpace | None = None,
    deadline: float | None = None,
) -> RunResult:
    space = space or InputSpace()
    if cfg.budget < 1:
        raise BudgetError("budget must be at least 1")
    evaluated = []
    for _ in range(cfg.budget):
        if evaluated and _expired(deadline):
            break
        x = sample_uniform(space, rng)
        evaluated.append(Individual(x, evaluator(x)))
    fronts = assign_rank_and_crowding(evaluated)
    front = [evaluated[i] for i in fronts[0]]
    history = [[ind.objectives for ind in front]]
    return RunResult("random", cfg.seed, cfg, front, list(front), evaluated, history)
