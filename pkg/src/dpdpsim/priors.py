"""Hand-built informative priors and the sampling policy that uses them.

Vehicle choice for a request is weighted by free-space fraction, with a small
constant weight on deferring.  Destination choice sends a vehicle toward
stations where it can drop cargo (weight 1) or, failing that, toward visible
pickups with weight inversely proportional to distance.  Weights are returned
raw; samplers renormalize over whatever is feasible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DEFER, JointAction, RequestState, WorldState


@dataclass
class PriorConfig:
    defer_weight: float = 0.03
    pickup_scale: float = 0.1


DEFAULT_PRIOR = PriorConfig()


def vehicle_selection_prior(
    state: WorldState,
    m: int,
    config: PriorConfig = DEFAULT_PRIOR,
    committed: list[int] | None = None,
) -> np.ndarray:
    """Weights over (vehicles..., DEFER) for assigning request ``m``.

    A feasible vehicle weighs space/capacity, where space is reduced by any
    volume already committed to it this slice (``committed``).  Vehicles that
    are away, elsewhere, or too full weigh zero.  The final slot is DEFER.
    """
    req = state.scenario.requests[m]
    n = len(state.vehicles)
    w = np.zeros(n + 1, dtype=float)
    for k, v in enumerate(state.vehicles):
        free = v.space - (committed[k] if committed else 0)
        if v.remaining == 0 and v.station == req.origin and free >= req.volume:
            w[k] = free / v.capacity
    w[n] = config.defer_weight
    return w


def destination_prior(
    state: WorldState,
    k: int,
    config: PriorConfig = DEFAULT_PRIOR,
    extra_onboard: frozenset[int] | set[int] = frozenset(),
    claimed: frozenset[int] | set[int] = frozenset(),
) -> np.ndarray:
    """Weights over stations for dispatching vehicle ``k``.

    A station holding cargo this vehicle can drop weighs 1.  Otherwise a
    station with a waiting visible pickup weighs pickup_scale * (mean network
    distance) / distance, and 1 when the vehicle is already there.  If nothing
    weighs anything, fall back to uniform.

    ``extra_onboard`` are requests being loaded onto ``k`` in the current
    slice; ``claimed`` are requests being loaded onto any vehicle, hence no
    longer awaiting pickup.
    """
    scenario = state.scenario
    n = scenario.station_count
    w = np.zeros(n, dtype=float)

    deliverable = set()
    for m, st in enumerate(state.states):
        if st == RequestState.PICKED and state.carriers[m] == k:
            deliverable.add(scenario.requests[m].destination)
    for m in extra_onboard:
        deliverable.add(scenario.requests[m].destination)

    # Stations only attract this vehicle for pickup if it still has room for
    # at least one request waiting there.
    free = state.vehicles[k].space - sum(scenario.requests[m].volume for m in extra_onboard)
    pickup_stations = set()
    t = state.t
    for m, st in enumerate(state.states):
        if (
            st == RequestState.UNASSIGNED
            and scenario.requests[m].appear <= t
            and m not in claimed
            and scenario.requests[m].volume <= free
        ):
            pickup_stations.add(scenario.requests[m].origin)

    here = state.vehicles[k].station
    mean_e = scenario.graph.mean_distance()
    for i in range(n):
        if i in deliverable:
            w[i] = 1.0
        elif i in pickup_stations:
            e = scenario.graph.travel(here, i)
            w[i] = 1.0 if e == 0 else config.pickup_scale * mean_e / e
    if not w.any():
        return np.full(n, 1.0 / n)
    return w


def prior_act(
    state: WorldState, rng: np.random.Generator, config: PriorConfig = DEFAULT_PRIOR
) -> JointAction:
    """Sample a joint action from the priors.

    Requests are sampled in ascending index order with free space consumed as
    it is committed; vehicle destinations then account for cargo loaded this
    slice.
    """
    n_vehicles = len(state.vehicles)
    committed = [0] * n_vehicles
    onboard_now: list[set[int]] = [set() for _ in range(n_vehicles)]
    claimed: set[int] = set()

    request_actions: dict[int, int] = {}
    for m in state.decidable_requests():
        w = vehicle_selection_prior(state, m, config, committed)
        p = w / w.sum()
        choice = int(rng.choice(n_vehicles + 1, p=p))
        if choice == n_vehicles:
            request_actions[m] = DEFER
        else:
            request_actions[m] = choice
            committed[choice] += state.scenario.requests[m].volume
            onboard_now[choice].add(m)
            claimed.add(m)

    vehicle_actions: dict[int, int] = {}
    for k in state.decidable_vehicles():
        w = destination_prior(state, k, config, extra_onboard=onboard_now[k], claimed=claimed)
        p = w / w.sum()
        vehicle_actions[k] = int(rng.choice(len(p), p=p))

    return JointAction(request_actions=request_actions, vehicle_actions=vehicle_actions)


def greedy_prior_act(state: WorldState, config: PriorConfig = DEFAULT_PRIOR) -> JointAction:
    """Deterministic decode of the priors: highest weight wins everywhere.

    Destination ties (all droppable stations weigh 1) break toward the
    nearest station and then the lowest index, so a loaded vehicle works off
    its cargo along short hops instead of jumping to an arbitrary drop.
    """
    scenario = state.scenario
    n_vehicles = len(state.vehicles)
    committed = [0] * n_vehicles
    onboard_now: list[set[int]] = [set() for _ in range(n_vehicles)]
    claimed: set[int] = set()

    request_actions: dict[int, int] = {}
    for m in state.decidable_requests():
        w = vehicle_selection_prior(state, m, config, committed)
        choice = int(np.argmax(w))
        if choice == n_vehicles:
            request_actions[m] = DEFER
        else:
            request_actions[m] = choice
            committed[choice] += scenario.requests[m].volume
            onboard_now[choice].add(m)
            claimed.add(m)

    vehicle_actions: dict[int, int] = {}
    for k in state.decidable_vehicles():
        w = destination_prior(state, k, config, extra_onboard=onboard_now[k], claimed=claimed)
        here = state.vehicles[k].station
        best = max(
            range(len(w)),
            key=lambda i: (w[i], -scenario.graph.travel(here, i), -i),
        )
        vehicle_actions[k] = int(best)

    return JointAction(request_actions=request_actions, vehicle_actions=vehicle_actions)


class PriorPolicy:
    """Policy over the informative priors.

    ``mode="greedy"`` (default) decodes deterministically and is what the
    benchmarks report; ``mode="sample"`` draws from the normalized weights
    and is the exploration distribution.
    """

    def __init__(self, config: PriorConfig = DEFAULT_PRIOR, mode: str = "greedy"):
        if mode not in ("greedy", "sample"):
            raise ValueError(f"unknown prior decode mode: {mode!r}")
        self.config = config
        self.mode = mode

    def __call__(self, state: WorldState, rng: np.random.Generator | None = None) -> JointAction:
        if self.mode == "sample":
            if rng is None:
                raise ValueError("sample mode needs an rng")
            return prior_act(state, rng, self.config)
        return greedy_prior_act(state, self.config)
