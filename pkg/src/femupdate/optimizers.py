"""Bound-constrained continuous minimizers: PSO, simulated annealing, GA.

All three share the same contract: a pure scalar objective, a (d, 2) box
of bounds, a seeded config, and an OptimizerRun result whose best-so-far
history is non-increasing.  Candidates are projected onto the bounds
before every evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

Objective = Callable[[np.ndarray], float]


class ObjectiveError(RuntimeError):
    """The objective returned a non-finite value."""


@dataclass(frozen=True)
class PsoConfig:
    """Particle swarm settings.

    ``inertia``/``c1``/``c2`` defaults are standard constriction-equivalent
    values; ``v_max`` caps velocities at that fraction of each bound width.
    ``per_dimension_r`` switches the stochastic factors r1, r2 from one
    scalar per particle per step to one draw per dimension.
    """

    swarm_size: int = 50
    max_steps: int = 100
    inertia: float = 0.72
    c1: float = 1.49
    c2: float = 1.49
    v_max: float | None = None
    per_dimension_r: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.swarm_size < 2:
            raise ValueError("swarm_size must be >= 2")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.inertia < 0 or self.c1 < 0 or self.c2 < 0:
            raise ValueError("inertia, c1 and c2 must be non-negative")
        if self.v_max is not None and self.v_max <= 0:
            raise ValueError("v_max must be positive when given")


@dataclass(frozen=True)
class SaConfig:
    """Simulated annealing settings.

    ``initial_temperature=None`` estimates T0 as the standard deviation of
    the objective over 50 uniform random samples.  Each temperature stage
    runs ``steps_per_temperature`` proposals (default ``schedule_scale * d``),
    then T is multiplied by ``cooling`` until it falls below
    ``freeze_ratio * T0`` (the frozen state).
    """

    initial_temperature: float | None = None
    cooling: float = 0.95
    steps_per_temperature: int | None = None
    schedule_scale: int = 4
    n_runs: int = 3
    step_scale: float = 0.1
    freeze_ratio: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.initial_temperature is not None and self.initial_temperature <= 0:
            raise ValueError("initial_temperature must be positive")
        if not 0.0 < self.cooling < 1.0:
            raise ValueError("cooling must lie in (0, 1)")
        if self.steps_per_temperature is not None and self.steps_per_temperature < 1:
            raise ValueError("steps_per_temperature must be >= 1")
        if self.schedule_scale < 1:
            raise ValueError("schedule_scale must be >= 1")
        if self.n_runs < 1:
            raise ValueError("n_runs must be >= 1")
        if self.step_scale <= 0:
            raise ValueError("step_scale must be positive")
        if not 0.0 < self.freeze_ratio < 1.0:
            raise ValueError("freeze_ratio must lie in (0, 1)")


@dataclass(frozen=True)
class GaConfig:
    """Real-coded GA settings: normalized-geometric rank selection,
    arithmetic crossover, non-uniform mutation, one elite per generation."""

    population_size: int = 600
    generations: int = 100
    p_best_select: float = 0.08
    crossover_rate: float = 0.8
    mutation_rate: float = 0.2
    mutation_shape: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if self.generations < 1:
            raise ValueError("generations must be >= 1")
        if not 0.0 < self.p_best_select < 1.0:
            raise ValueError("p_best_select must lie in (0, 1)")
        for name in ("crossover_rate", "mutation_rate"):
            rate = getattr(self, name)
            if not 0.0 <= rate <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.mutation_shape <= 0:
            raise ValueError("mutation_shape must be positive")


@dataclass(frozen=True)
class OptimizerRun:
    """Result of one optimizer run: best point, best cost, best-so-far
    history (non-increasing, ends at best_cost) and evaluation count."""

    best_params: np.ndarray
    best_cost: float
    history: np.ndarray
    evaluations: int
    seed: int


class _Tracker:
    """Counts evaluations, guards against non-finite values and keeps the
    best-so-far candidate."""

    def __init__(self, objective: Objective):
        self.objective = objective
        self.evaluations = 0
        self.best_cost = math.inf
        self.best_params: np.ndarray | None = None

    def __call__(self, params: np.ndarray, context: str) -> float:
        cost = float(self.objective(params))
        self.evaluations += 1
        if not math.isfinite(cost):
            raise ObjectiveError(f"non-finite objective value {cost!r} at {context}")
        if cost < self.best_cost:
            self.best_cost = cost
            self.best_params = params.copy()
        return cost


def _check_bounds(bounds) -> tuple[np.ndarray, np.ndarray]:
    bounds = np.asarray(bounds, dtype=float)
    if bounds.ndim != 2 or bounds.shape[1] != 2:
        raise ValueError("bounds must have shape (d, 2)")
    if not np.all(np.isfinite(bounds)):
        raise ValueError("bounds must be finite")
    if np.any(bounds[:, 0] >= bounds[:, 1]):
        raise ValueError("each bound must satisfy lo < hi")
    return bounds[:, 0].copy(), bounds[:, 1].copy()


def pso_minimize(
    objective: Objective,
    bounds,
    config: PsoConfig,
    x0: Sequence[float] | None = None,
    on_step: Callable[[dict], None] | None = None,
) -> OptimizerRun:
    """Particle swarm minimization.

    Velocity and position updates per particle i and step k:
        v_i(k+1) = w v_i(k) + c1 r1 (pbest_i - p_i) + c2 r2 (gbest - p_i)
        p_i(k+1) = p_i(k) + v_i(k+1)
    with fresh r1, r2 ~ U(0,1) each step and positions clipped to bounds.

    Parameters
    ----------
    objective : callable
        Pure params -> cost function.
    bounds : array-like, shape (d, 2)
        Per-dimension [lo, hi].
    config : PsoConfig
    x0 : array-like, optional
        When given, particle 0 starts here instead of at a random point.
    on_step : callable, optional
        Called after every step with a dict of the swarm state
        (instrumentation only; must not mutate it).
    """
    lo, hi = _check_bounds(bounds)
    d = lo.shape[0]
    width = hi - lo
    rng = np.random.default_rng(config.seed)
    track = _Tracker(objective)

    positions = lo + rng.random((config.swarm_size, d)) * width
    velocities = rng.uniform(-width, width, size=(config.swarm_size, d))
    if x0 is not None:
        positions[0] = np.clip(np.asarray(x0, dtype=float), lo, hi)
    costs = np.array(
        [track(positions[i], f"particle {i}, step 0") for i in range(config.swarm_size)]
    )
    pbest = positions.copy()
    pbest_cost = costs.copy()
    g = int(np.argmin(pbest_cost))
    gbest = pbest[g].copy()
    gbest_cost = float(pbest_cost[g])
    history = [gbest_cost]

    for step in range(1, config.max_steps + 1):
        if config.per_dimension_r:
            r1 = rng.random((config.swarm_size, d))
            r2 = rng.random((config.swarm_size, d))
        else:
            r1 = rng.random((config.swarm_size, 1))
            r2 = rng.random((config.swarm_size, 1))
        velocities = (
            config.inertia * velocities
            + config.c1 * r1 * (pbest - positions)
            + config.c2 * r2 * (gbest[None, :] - positions)
        )
        if config.v_max is not None:
            cap = config.v_max * width
            velocities = np.clip(velocities, -cap, cap)
        positions = np.clip(positions + velocities, lo, hi)
        for i in range(config.swarm_size):
            cost = track(positions[i], f"particle {i}, step {step}")
            if cost < pbest_cost[i]:
                pbest_cost[i] = cost
                pbest[i] = positions[i]
        g = int(np.argmin(pbest_cost))
        if pbest_cost[g] < gbest_cost:
            gbest_cost = float(pbest_cost[g])
            gbest = pbest[g].copy()
        history.append(gbest_cost)
        if on_step is not None:
            on_step(
                {
                    "step": step,
                    "positions": positions,
                    "velocities": velocities,
                    "pbest": pbest,
                    "pbest_cost": pbest_cost,
                    "gbest": gbest,
                    "gbest_cost": gbest_cost,
                }
            )

    return OptimizerRun(
        best_params=gbest,
        best_cost=gbest_cost,
        history=np.asarray(history),
        evaluations=track.evaluations,
        seed=config.seed,
    )


def metropolis_accept(
    e_new: float, e_old: float, temperature: float, rng: np.random.Generator
) -> bool:
    """Metropolis rule: always accept improvements, otherwise accept with
    probability exp(-(e_new - e_old) / T)."""
    if e_new < e_old:
        return True
    if temperature <= 0.0:
        return False
    return rng.random() < math.exp(-(e_new - e_old) / temperature)


def sa_n_stages(config: SaConfig) -> int:
    """Temperature stages until geometric cooling reaches the frozen state."""
    return math.ceil(math.log(config.freeze_ratio) / math.log(config.cooling))


def sa_minimize(
    objective: Objective,
    bounds,
    config: SaConfig,
    x0: Sequence[float] | None = None,
) -> OptimizerRun:
    """Simulated annealing over ``config.n_runs`` independent runs.

    Each run starts at a uniform random point (run 0 starts at ``x0`` when
    given), proposes Gaussian perturbations of one randomly chosen
    coordinate with std ``step_scale`` times that bound width, accepts per
    the Metropolis rule and cools geometrically until frozen.  The best
    point ever evaluated across all runs is returned.
    """
    lo, hi = _check_bounds(bounds)
    d = lo.shape[0]
    width = hi - lo
    rng = np.random.default_rng(config.seed)
    track = _Tracker(objective)
    history: list[float] = []

    if config.initial_temperature is None:
        samples = lo + rng.random((50, d)) * width
        sample_costs = np.array(
            [track(samples[i], f"T0 sample {i}") for i in range(50)]
        )
        for _ in sample_costs:
            history.append(track.best_cost)
        t0 = float(np.std(sample_costs))
        if t0 <= 0.0:
            t0 = 1.0
    else:
        t0 = config.initial_temperature

    steps = config.steps_per_temperature
    if steps is None:
        steps = config.schedule_scale * d
    n_stages = sa_n_stages(config)

    for run in range(config.n_runs):
        if run == 0 and x0 is not None:
            current = np.clip(np.asarray(x0, dtype=float), lo, hi)
        else:
            current = lo + rng.random(d) * width
        current_cost = track(current, f"run {run}, start")
        history.append(track.best_cost)
        temperature = t0
        for stage in range(n_stages):
            for step in range(steps):
                candidate = current.copy()
                j = int(rng.integers(d))
                candidate[j] += config.step_scale * width[j] * rng.standard_normal()
                candidate = np.clip(candidate, lo, hi)
                cost = track(candidate, f"run {run}, stage {stage}, step {step}")
                if metropolis_accept(cost, current_cost, temperature, rng):
                    current = candidate
                    current_cost = cost
                history.append(track.best_cost)
            temperature *= config.cooling

    assert track.best_params is not None
    return OptimizerRun(
        best_params=track.best_params,
        best_cost=track.best_cost,
        history=np.asarray(history),
        evaluations=track.evaluations,
        seed=config.seed,
    )


def _geometric_pmf(n_ranked: int, q: float) -> np.ndarray:
    normalizer = q / (1.0 - (1.0 - q) ** n_ranked)
    return normalizer * (1.0 - q) ** np.arange(n_ranked)


def normalized_geometric_select(
    ranked_costs: Sequence[float],
    q: float,
    rng: np.random.Generator,
    size: int | None = None,
):
    """Draw parent indices from the normalized geometric rank distribution.

    ``ranked_costs`` must be ordered best-first; only its length matters.
    Rank r is selected with probability q' (1-q)^r where
    q' = q / (1 - (1-q)^P) normalizes over the population.  Returns a
    single index, or an array of ``size`` indices.
    """
    n_ranked = len(ranked_costs)
    if n_ranked < 1:
        raise ValueError("ranked population is empty")
    if not 0.0 < q < 1.0:
        raise ValueError("q must lie in (0, 1)")
    cdf = np.cumsum(_geometric_pmf(n_ranked, q))
    u = rng.random() if size is None else rng.random(size)
    index = np.minimum(np.searchsorted(cdf, u, side="right"), n_ranked - 1)
    return int(index) if size is None else index


def arithmetic_crossover(
    parent1: np.ndarray,
    parent2: np.ndarray,
    rng: np.random.Generator,
    a: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Interpolate two parents with a shared a ~ U(0,1):
    child1 = a p1 + (1-a) p2 and child2 = (1-a) p1 + a p2.

    ``a`` may be passed explicitly instead of drawn from ``rng``.
    """
    p1 = np.asarray(parent1, dtype=float)
    p2 = np.asarray(parent2, dtype=float)
    if p1.shape != p2.shape:
        raise ValueError("parents must have equal dimension")
    if a is None:
        a = rng.random()
    elif not 0.0 <= a <= 1.0:
        raise ValueError("a must lie in [0, 1]")
    return a * p1 + (1.0 - a) * p2, (1.0 - a) * p1 + a * p2


def nonuniform_mutate(
    individual: np.ndarray,
    bounds,
    generation: int,
    max_generations: int,
    shape: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Move one random coordinate toward a random bound by
    delta = gap * (1 - u^((1 - g/G)^b)), shrinking to zero as g -> G.

    ``gap`` is the distance from the coordinate to the chosen bound, so the
    result always stays in bounds.
    """
    if not 0 <= generation <= max_generations:
        raise ValueError("generation must lie in 0..max_generations")
    if shape <= 0:
        raise ValueError("shape must be positive")
    lo, hi = _check_bounds(bounds)
    x = np.asarray(individual, dtype=float).copy()
    j = int(rng.integers(x.shape[0]))
    u = rng.random()
    toward_upper = rng.random() < 0.5
    fraction = 1.0 - generation / max_generations
    scale = 1.0 - u ** (fraction**shape)
    if toward_upper:
        x[j] += (hi[j] - x[j]) * scale
    else:
        x[j] -= (x[j] - lo[j]) * scale
    return x


def ga_minimize(
    objective: Objective,
    bounds,
    config: GaConfig,
    x0: Sequence[float] | None = None,
) -> OptimizerRun:
    """Real-coded genetic algorithm.

    Each generation: rank the population by cost, draw a full set of
    parents by normalized-geometric selection, pair them for arithmetic
    crossover (probability ``crossover_rate`` per pair), apply non-uniform
    mutation (probability ``mutation_rate`` per individual), and copy the
    best-ever individual unchanged into the last slot (elitism).
    """
    lo, hi = _check_bounds(bounds)
    d = lo.shape[0]
    width = hi - lo
    bounds_array = np.column_stack([lo, hi])
    rng = np.random.default_rng(config.seed)
    track = _Tracker(objective)
    P = config.population_size

    population = lo + rng.random((P, d)) * width
    if x0 is not None:
        population[0] = np.clip(np.asarray(x0, dtype=float), lo, hi)
    costs = np.array([track(population[i], f"individual {i}, generation 0") for i in range(P)])
    history = [track.best_cost]
    cdf = np.cumsum(_geometric_pmf(P, config.p_best_select))

    for generation in range(1, config.generations + 1):
        order = np.argsort(costs, kind="stable")
        ranked = population[order]
        parent_ranks = np.minimum(
            np.searchsorted(cdf, rng.random(P), side="right"), P - 1
        )
        children = ranked[parent_ranks].copy()
        for pair in range(0, P - 1, 2):
            if rng.random() < config.crossover_rate:
                children[pair], children[pair + 1] = arithmetic_crossover(
                    children[pair], children[pair + 1], rng
                )
        for i in range(P):
            if rng.random() < config.mutation_rate:
                children[i] = nonuniform_mutate(
                    children[i],
                    bounds_array,
                    generation,
                    config.generations,
                    config.mutation_shape,
                    rng,
                )
        assert track.best_params is not None
        children[P - 1] = track.best_params  # elitism
        population = np.clip(children, lo, hi)
        costs = np.array(
            [track(population[i], f"individual {i}, generation {generation}") for i in range(P)]
        )
        history.append(track.best_cost)

    assert track.best_params is not None
    return OptimizerRun(
        best_params=track.best_params,
        best_cost=track.best_cost,
        history=np.asarray(history),
        evaluations=track.evaluations,
        seed=config.seed,
    )
