"""
Adaptive Plant Propagation Algorithm (strawberry algorithm) for bounded
continuous minimization.

Each plant sends out runners. Plants in good spots (high normalized fitness)
send many short runners; plants in poor spots send a few long ones. Runners
that leave the search box are clamped back onto it. After every generation the
expanded population is sorted and truncated, and plants that stagnate for too
long are abandoned and re-seeded uniformly inside the box.

Randomness comes from a single ``numpy.random.Generator`` backed by PCG64, so a
run is reproducible bit-for-bit from its seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "AppaParams",
    "GenerationRecord",
    "InvalidObjectiveError",
    "Plant",
    "Population",
    "RunTrace",
    "SearchSpace",
    "apply_abandonment",
    "make_rng",
    "normalize_fitness",
    "run",
    "runner_count",
    "runner_offsets",
    "spawn_runner",
    "survival_order",
    "survive",
]

FITNESS_MIN = 0.5 * (math.tanh(-2.0) + 1.0)
FITNESS_MAX = 0.5 * (math.tanh(2.0) + 1.0)


class InvalidObjectiveError(ValueError):
    """Raised when an objective value is NaN or infinite."""


def make_rng(seed: int) -> np.random.Generator:
    """Return the project PRNG (PCG64) for a 64-bit unsigned seed."""
    if not 0 <= int(seed) < 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Generator(np.random.PCG64(int(seed)))


@dataclass(frozen=True)
class SearchSpace:
    """Axis-aligned box ``lower[j] <= x[j] <= upper[j]``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.array(self.lower, dtype=float).reshape(-1)
        upper = np.array(self.upper, dtype=float).reshape(-1)
        if lower.size == 0:
            raise ValueError("search space needs at least one coordinate")
        if lower.shape != upper.shape:
            raise ValueError(
                f"lower and upper must have the same length, got {lower.size} and {upper.size}"
            )
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise ValueError("bounds must be finite")
        bad = np.flatnonzero(~(lower < upper))
        if bad.size:
            j = int(bad[0])
            raise ValueError(
                f"lower must be strictly below upper, coordinate {j}: {lower[j]} >= {upper[j]}"
            )
        lower.flags.writeable = False
        upper.flags.writeable = False
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dims(self) -> int:
        return self.lower.size

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all((x >= self.lower) & (x <= self.upper)))

    def clamp(self, x) -> np.ndarray:
        return np.clip(x, self.lower, self.upper)

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """Draw ``count`` points uniformly from the box, shape ``(count, dims)``."""
        u = rng.random((count, self.dims))
        return self.clamp(self.lower + u * self.width)


@dataclass(frozen=True)
class AppaParams:
    population_size: int = 30
    max_generations: int = 200
    max_runners: int = 5
    stagnation_threshold: int = 10
    seed: int = 0

    def __post_init__(self):
        checks = [
            ("population_size", 2),
            ("max_generations", 1),
            ("max_runners", 1),
            ("stagnation_threshold", 1),
        ]
        for name, minimum in checks:
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise ValueError(f"{name} must be an integer, got {value!r}")
            if value < minimum:
                raise ValueError(f"{name} must be >= {minimum}, got {value}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")


@dataclass(frozen=True)
class Plant:
    """One candidate solution."""

    position: np.ndarray
    objective: float
    fitness: float = 0.5
    stagnation: int = 0


@dataclass
class Population:
    """Struct-of-arrays view of a set of plants.

    Row order is creation order, which is what survival tie-breaks on.
    """

    positions: np.ndarray
    objectives: np.ndarray
    stagnation: np.ndarray
    fitness: np.ndarray | None = None

    def __len__(self) -> int:
        return self.objectives.size

    @classmethod
    def from_plants(cls, plants: Sequence[Plant]) -> "Population":
        return cls(
            positions=np.array([p.position for p in plants], dtype=float),
            objectives=np.array([p.objective for p in plants], dtype=float),
            stagnation=np.array([p.stagnation for p in plants], dtype=np.int64),
            fitness=np.array([p.fitness for p in plants], dtype=float),
        )

    def take(self, index) -> "Population":
        return Population(
            positions=self.positions[index].copy(),
            objectives=self.objectives[index].copy(),
            stagnation=self.stagnation[index].copy(),
            fitness=None if self.fitness is None else self.fitness[index].copy(),
        )

    def plant(self, i: int) -> Plant:
        fit = 0.5 if self.fitness is None else float(self.fitness[i])
        return Plant(
            position=self.positions[i].copy(),
            objective=float(self.objectives[i]),
            fitness=fit,
            stagnation=int(self.stagnation[i]),
        )

    def plants(self) -> list[Plant]:
        return [self.plant(i) for i in range(len(self))]


@dataclass(frozen=True)
class GenerationRecord:
    generation: int
    best_objective: float
    mean_objective: float
    best_position: np.ndarray


@dataclass
class RunTrace:
    generations: list[GenerationRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.generations)

    @property
    def best_objectives(self) -> np.ndarray:
        return np.array([g.best_objective for g in self.generations])

    @property
    def mean_objectives(self) -> np.ndarray:
        return np.array([g.mean_objective for g in self.generations])


def normalize_fitness(objectives) -> np.ndarray:
    """Map raw objective values (lower is better) into [0, 1].

    Objectives are first rescaled to ``z = (F_max - F) / (F_max - F_min)`` so
    the best plant gets ``z = 1`` and the worst ``z = 0``; a population with
    no spread gets ``z = 0.5`` everywhere. The tanh squash
    ``0.5 * (tanh(4z - 2) + 1)`` is then applied.
    """
    f = np.asarray(objectives, dtype=float)
    if f.ndim != 1 or f.size < 2:
        raise ValueError("need a 1-D vector of at least two objective values")
    if not np.all(np.isfinite(f)):
        i = int(np.flatnonzero(~np.isfinite(f))[0])
        raise InvalidObjectiveError(f"objective {i} is not finite: {f[i]}")
    f_min, f_max = f.min(), f.max()
    spread = f_max - f_min
    if spread > 0 and np.isfinite(spread):
        z = np.clip((f_max - f) / spread, 0.0, 1.0)
    elif spread > 0:
        # spread overflowed; rescale in two steps
        z = np.clip((f_max / 2 - f / 2) / (f_max / 2 - f_min / 2), 0.0, 1.0)
    else:
        z = np.full(f.size, 0.5)
    return 0.5 * (np.tanh(4.0 * z - 2.0) + 1.0)


def runner_count(fitness, max_runners: int, rng: np.random.Generator):
    """Number of runners ``max(1, ceil(max_runners * fitness * r))``, r ~ U[0, 1).

    ``fitness`` may be a scalar (returns ``int``) or an array (one draw per
    entry, returns an integer array).
    """
    fit = np.asarray(fitness, dtype=float)
    if np.any((fit < 0) | (fit > 1)):
        raise ValueError("fitness must lie in [0, 1]")
    r = rng.random(fit.shape) if fit.ndim else rng.random()
    n = np.ceil(max_runners * fit * r)
    n = np.clip(n, 1, max_runners).astype(np.int64)
    return int(n) if fit.ndim == 0 else n


def runner_offsets(fitness, dims: int, rng: np.random.Generator) -> np.ndarray:
    """Normalized runner lengths ``(1 - fitness) * (r_j - 0.5)``.

    One fresh uniform draw per coordinate. Scalar ``fitness`` gives shape
    ``(dims,)``; a vector of ``m`` fitness values gives ``(m, dims)``.
    """
    fit = np.asarray(fitness, dtype=float)
    if np.any((fit < 0) | (fit > 1)):
        raise ValueError("fitness must lie in [0, 1]")
    shape = (dims,) if fit.ndim == 0 else (fit.size, dims)
    r = rng.random(shape)
    scale = (1.0 - fit) if fit.ndim == 0 else (1.0 - fit)[:, None]
    return scale * (r - 0.5)


def spawn_runner(parent, offsets, space: SearchSpace) -> np.ndarray:
    """Place a runner at ``parent + width * offsets``, clamped onto the box.

    ``parent`` is a position (or a :class:`Plant`); batches of positions and
    offsets broadcast row-wise.
    """
    y = parent.position if isinstance(parent, Plant) else parent
    x = np.asarray(y, dtype=float) + space.width * np.asarray(offsets, dtype=float)
    return space.clamp(x)


def survival_order(objectives, population_size: int) -> np.ndarray:
    """Indices of the ``population_size`` best entries, ties kept in input order."""
    f = np.asarray(objectives, dtype=float)
    if f.size < population_size:
        raise RuntimeError(
            f"survival pool has {f.size} plants, fewer than population size {population_size}"
        )
    if f.size > 4 * population_size:
        # only entries at or below the cut value can survive; candidates stay
        # in ascending index order so the stable sort keeps creation order
        cut = np.partition(f, population_size - 1)[population_size - 1]
        cand = np.flatnonzero(f <= cut)
        return cand[np.argsort(f[cand], kind="stable")[:population_size]]
    return np.argsort(f, kind="stable")[:population_size]


def survive(pool: Population | Sequence[Plant], population_size: int):
    """Sort the pool by objective and keep the first ``population_size``."""
    if isinstance(pool, Population):
        return pool.take(survival_order(pool.objectives, population_size))
    plants = list(pool)
    order = survival_order([p.objective for p in plants], population_size)
    return [plants[i] for i in order]


def apply_abandonment(
    population: Population | Sequence[Plant],
    threshold: int,
    space: SearchSpace,
    rng: np.random.Generator,
    objective: Callable | None = None,
    vectorized: bool = False,
):
    """Re-seed plants whose stagnation counter reached ``threshold``.

    The current best plant (lowest objective, earliest on ties) is never
    abandoned. Replacements are drawn uniformly in the box, in population
    order, and start with a zero counter. When ``objective`` is given the
    replacements are evaluated; otherwise their objective is set to ``inf``
    and the caller must evaluate them.
    """
    as_list = not isinstance(population, Population)
    pop = Population.from_plants(population) if as_list else population.take(slice(None))
    stale = pop.stagnation >= threshold
    stale[int(np.argmin(pop.objectives))] = False
    idx = np.flatnonzero(stale)
    if idx.size:
        fresh = space.sample(rng, idx.size)
        pop.positions[idx] = fresh
        pop.stagnation[idx] = 0
        if objective is not None:
            pop.objectives[idx] = _evaluate(objective, fresh, vectorized)
        else:
            pop.objectives[idx] = np.inf
    return pop.plants() if as_list else pop


def _evaluate(objective: Callable, positions: np.ndarray, vectorized: bool) -> np.ndarray:
    if vectorized:
        values = np.asarray(objective(positions), dtype=float).reshape(-1)
        if values.size != positions.shape[0]:
            raise ValueError(
                f"vectorized objective returned {values.size} values for {positions.shape[0]} positions"
            )
    else:
        values = np.array([float(objective(x)) for x in positions])
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        i = int(bad[0])
        raise InvalidObjectiveError(
            f"objective returned {values[i]} at position {positions[i].tolist()}"
        )
    return values


def run(
    objective: Callable,
    space: SearchSpace,
    params: AppaParams,
    vectorized: bool = False,
) -> tuple[Plant, RunTrace]:
    """Minimize ``objective`` over ``space``.

    Parameters
    ----------
    objective : callable
        Maps a position of shape ``(dims,)`` to a finite float. With
        ``vectorized=True`` it receives an ``(m, dims)`` array and returns
        ``m`` values instead.
    space : SearchSpace
        Box to search; every evaluated position lies inside it.
    params : AppaParams
        Population size, budget, runner cap, stagnation threshold and seed.

    Returns
    -------
    best : Plant
        Best plant observed during the run.
    trace : RunTrace
        One record per generation.
    """
    rng = make_rng(params.seed)
    n_pop = params.population_size

    positions = space.sample(rng, n_pop)
    pop = Population(
        positions=positions,
        objectives=_evaluate(objective, positions, vectorized),
        stagnation=np.zeros(n_pop, dtype=np.int64),
    )
    pop.fitness = normalize_fitness(pop.objectives)
    best = pop.plant(int(np.argmin(pop.objectives)))
    trace = RunTrace()

    for gen in range(1, params.max_generations + 1):
        counts = runner_count(pop.fitness, params.max_runners, rng)
        parent = np.repeat(np.arange(n_pop), counts)
        offsets = runner_offsets(pop.fitness[parent], space.dims, rng)
        children = spawn_runner(pop.positions[parent], offsets, space)
        child_obj = _evaluate(objective, children, vectorized)

        pool = Population(
            positions=np.vstack([pop.positions, children]),
            objectives=np.concatenate([pop.objectives, child_obj]),
            stagnation=np.concatenate([pop.stagnation, np.zeros(parent.size, dtype=np.int64)]),
        )
        keep = survival_order(pool.objectives, n_pop)

        kept_children = keep[keep >= n_pop] - n_pop
        improved = np.zeros(n_pop, dtype=bool)
        better = child_obj[kept_children] < pop.objectives[parent[kept_children]]
        improved[parent[kept_children[better]]] = True
        pool.stagnation[:n_pop] = np.where(improved, 0, pop.stagnation + 1)

        pop = pool.take(keep)
        pop = apply_abandonment(
            pop, params.stagnation_threshold, space, rng, objective, vectorized
        )
        pop.fitness = normalize_fitness(pop.objectives)

        i_best = int(np.argmin(pop.objectives))
        if pop.objectives[i_best] < best.objective:
            best = pop.plant(i_best)
        trace.generations.append(
            GenerationRecord(
                generation=gen,
                best_objective=best.objective,
                mean_objective=float(np.mean(pop.objectives)),
                best_position=best.position.copy(),
            )
        )
    return best, trace
