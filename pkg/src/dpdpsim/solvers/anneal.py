"""Simulated annealing over static window assignments.

The move kernel is deliberately simple: pick one request, rip out its
current service entry, and either leave it unserved or reinsert it on a
random vehicle at random feasible times.  A geometric temperature schedule
decides whether worse assignments are accepted.  The best assignment seen
anywhere along the walk is what gets returned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .window import (
    Plan,
    StaticInstance,
    assignment_objective,
    assignment_plan,
    random_assignment,
    sample_entry,
)


@dataclass
class SAParams:
    initial_temp: float = 1000.0
    final_temp: float = 1.0
    cooling: float = 0.99
    max_iters: int = 5000

    def __post_init__(self):
        if self.initial_temp <= 0 or self.final_temp <= 0:
            raise ValueError("temperatures must be positive")
        if not 0.0 < self.cooling < 1.0:
            raise ValueError("cooling factor must lie in (0, 1)")
        if self.max_iters < 1:
            raise ValueError("need at least one iteration")


def sa_solve(
    instance: StaticInstance,
    params: SAParams | None = None,
    rng=None,
    history: list | None = None,
) -> Plan:
    """Anneal toward a high-value schedule, returning the best plan found.

    ``history``, if given, collects the best objective after every
    iteration; it is non-decreasing by construction.
    """
    if params is None:
        params = SAParams()
    if rng is None:
        import numpy as np

        rng = np.random.default_rng()

    current = random_assignment(instance, rng)
    current_obj = assignment_objective(instance, current)
    assert current_obj is not None
    best = dict(current)
    best_obj = current_obj

    temp = params.initial_temp
    for _ in range(params.max_iters):
        if instance.requests:
            m = int(rng.integers(0, len(instance.requests)))
            candidate = dict(current)
            candidate[m] = None
            if rng.random() < 0.8:
                entry = sample_entry(instance, candidate, m, rng)
                if entry is not None:
                    candidate[m] = entry
            cand_obj = assignment_objective(instance, candidate)
            if cand_obj is not None:
                delta = cand_obj - current_obj
                if delta >= 0 or rng.random() < math.exp(delta / temp):
                    current, current_obj = candidate, cand_obj
                    if current_obj > best_obj:
                        best, best_obj = dict(current), current_obj
        if history is not None:
            history.append(best_obj)
        temp = max(params.final_temp, temp * params.cooling)

    return assignment_plan(instance, best)
