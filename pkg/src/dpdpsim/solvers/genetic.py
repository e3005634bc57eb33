"""Genetic search over static window assignments.

Individuals are assignments (request -> service entry).  Fitness is an
exponential transform of the schedule objective so that selection pressure
stays positive even when objectives go negative.  Crossover copies one
request's service entry from the second parent into the first, repairing or
dropping it if it no longer fits; mutation reuses the annealer's move.  The
best individual ever seen is carried across generations and returned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .window import (
    Plan,
    StaticInstance,
    assignment_objective,
    assignment_plan,
    assignment_routes,
    random_assignment,
    sample_entry,
)


@dataclass
class GAParams:
    population: int = 10
    generations: int = 500
    # Divisor inside exp(objective / scale); None picks the instance's mean
    # request value (floored at 1) so fitness stays in a sane range.
    scale: float | None = None
    mutation_rate: float = 0.2

    def __post_init__(self):
        if self.population < 2:
            raise ValueError("population must hold at least two individuals")
        if self.generations < 1:
            raise ValueError("need at least one generation")
        if not 0.0 <= self.mutation_rate <= 1.0:
            raise ValueError("mutation rate is a probability")


def _fitness_scale(instance: StaticInstance, params: GAParams) -> float:
    if params.scale is not None:
        return params.scale
    if not instance.requests:
        return 1.0
    mean_value = sum(r.value for r in instance.requests) / len(instance.requests)
    return max(1.0, mean_value)


def ga_solve(
    instance: StaticInstance,
    params: GAParams | None = None,
    rng=None,
    history: list | None = None,
) -> Plan:
    """Evolve assignments for a fixed number of generations.

    ``history``, if given, collects the best objective after every
    generation; elitist tracking makes it non-decreasing.
    """
    if params is None:
        params = GAParams()
    if rng is None:
        import numpy as np

        rng = np.random.default_rng()

    scale = _fitness_scale(instance, params)
    population = [random_assignment(instance, rng) for _ in range(params.population)]
    objectives = []
    for indiv in population:
        obj = assignment_objective(instance, indiv)
        assert obj is not None
        objectives.append(obj)

    best_idx = max(range(len(population)), key=lambda i: objectives[i])
    best = dict(population[best_idx])
    best_obj = objectives[best_idx]

    for _ in range(params.generations):
        top = max(objectives)
        weights = [math.exp((o - top) / scale) for o in objectives]
        total = sum(weights)
        probs = [w / total for w in weights]

        next_pop = [dict(best)]
        next_obj = [best_obj]
        while len(next_pop) < params.population:
            ia = int(rng.choice(len(population), p=probs))
            ib = int(rng.choice(len(population), p=probs))
            child = dict(population[ia])
            if instance.requests:
                m = int(rng.integers(0, len(instance.requests)))
                child[m] = population[ib][m]
                if assignment_routes(instance, child) is None:
                    child[m] = None
                    entry = sample_entry(instance, child, m, rng)
                    if entry is not None:
                        child[m] = entry
                if rng.random() < params.mutation_rate:
                    m = int(rng.integers(0, len(instance.requests)))
                    child[m] = None
                    if rng.random() < 0.8:
                        entry = sample_entry(instance, child, m, rng)
                        if entry is not None:
                            child[m] = entry
            obj = assignment_objective(instance, child)
            assert obj is not None
            next_pop.append(child)
            next_obj.append(obj)
            if obj > best_obj:
                best, best_obj = dict(child), obj
        population, objectives = next_pop, next_obj
        if history is not None:
            history.append(best_obj)

    return assignment_plan(instance, best)
