"""Discrete-time simulator for the pickup-and-delivery dispatch problem.

Each time slice advances in a fixed phase order:

1. travel: every en-route vehicle advances one distance unit;
2. unload: every vehicle standing at distance zero drops all onboard cargo
   whose destination matches its station, crediting each request's value;
3. assign: visible unassigned requests are loaded onto chosen co-located
   standing vehicles, in ascending request index order, against free space;
4. dispatch: every standing vehicle is sent to its chosen destination (its
   own station is a legal zero-length leg) and the leg cost is charged
   immediately.

Travel and unloading precede the decisions of a slice, so a vehicle
dispatched at slice d on a leg of length e unloads at slice d + e and can
pick up and re-dispatch in that same slice.  States handed to policies sit
at the decision point: the slice's travel and unloading have already been
applied, and the value unloaded on arrival rides along as
``pending_reward`` until the next ``step`` call credits it.  Each slice's
reward is therefore the value delivered during it minus the dispatch cost
it spends, and the per-episode reward sum telescopes to the objective.
"""

from __future__ import annotations

import time as _time
from dataclasses import dataclass, field

import numpy as np

from .core import (
    DEFER,
    JointAction,
    RequestState,
    Scenario,
    Vehicle,
    WorldState,
    validate_scenario,
)


@dataclass
class Event:
    """One simulator occurrence, tagged with the slice it happened in.

    ``kind`` is one of pickup, dispatch, arrival, delivery.
    """

    kind: str
    time: int
    request: int | None = None
    vehicle: int | None = None
    station: int | None = None
    origin: int | None = None
    leg: int | None = None
    value: float | None = None


@dataclass
class StepResult:
    next_state: WorldState
    reward: float
    done: bool
    events: list[Event] = field(default_factory=list)


@dataclass
class ActionMasks:
    """Boolean feasibility tables for one slice.

    ``request_masks[m]`` has one slot per vehicle plus a final DEFER slot and
    exists only for decidable requests.  ``vehicle_masks`` has one row per
    vehicle over all stations; rows of en-route vehicles are all false.
    """

    request_masks: dict[int, np.ndarray]
    vehicle_masks: np.ndarray


@dataclass
class EpisodeSummary:
    objective: float
    delivered: int
    request_count: int
    completion: float
    steps: int
    seed: int
    rewards: list[float] = field(default_factory=list)
    wall_seconds: float = 0.0


def reset(scenario: Scenario, seed: int = 0) -> WorldState:
    """Fresh episode state at slice zero.  Deterministic; the seed is only
    recorded by callers for bookkeeping."""
    validate_scenario(scenario)
    vehicles = [
        Vehicle(capacity=spec.capacity, space=spec.capacity, station=spec.station, remaining=0)
        for spec in scenario.fleet
    ]
    return WorldState(
        scenario=scenario,
        t=0,
        vehicles=vehicles,
        states=[RequestState.UNASSIGNED] * len(scenario.requests),
        carriers=[-1] * len(scenario.requests),
    )


def _validate_action(state: WorldState, action: JointAction) -> None:
    scenario = state.scenario
    if state.t >= scenario.horizon:
        raise ValueError("episode already finished")

    decidable_r = state.decidable_requests()
    decidable_v = state.decidable_vehicles()

    got_r = set(action.request_actions)
    want_r = set(decidable_r)
    if got_r != want_r:
        missing = sorted(want_r - got_r)
        extra = sorted(got_r - want_r)
        raise ValueError(
            f"request actions must cover exactly the decidable requests; "
            f"missing {missing}, unexpected {extra}"
        )
    got_v = set(action.vehicle_actions)
    want_v = set(decidable_v)
    if got_v != want_v:
        missing = sorted(want_v - got_v)
        extra = sorted(got_v - want_v)
        raise ValueError(
            f"vehicle actions must cover exactly the at-station vehicles; "
            f"missing {missing}, unexpected {extra}"
        )

    # Assignment feasibility, with free space consumed in ascending request
    # index order within the slice.
    committed = [0] * len(state.vehicles)
    for m in decidable_r:
        k = action.request_actions[m]
        if k == DEFER:
            continue
        if not 0 <= k < len(state.vehicles):
            raise ValueError(f"request {m} assigned to unknown vehicle {k}")
        v = state.vehicles[k]
        req = scenario.requests[m]
        if v.remaining != 0:
            raise ValueError(f"request {m} assigned to en-route vehicle {k}")
        if v.station != req.origin:
            raise ValueError(
                f"request {m} originates at station {req.origin} but vehicle {k} "
                f"is at station {v.station}"
            )
        if v.space - committed[k] < req.volume:
            raise ValueError(
                f"request {m} volume {req.volume} exceeds free space of vehicle {k}"
            )
        committed[k] += req.volume

    n = scenario.station_count
    for k in decidable_v:
        dest = action.vehicle_actions[k]
        if not 0 <= dest < n:
            raise ValueError(f"vehicle {k} sent to unknown station {dest}")


def step(state: WorldState, action: JointAction) -> StepResult:
    """Advance one slice.  Pure: the input state is never touched, and a
    rejected action raises before any copy is made."""
    _validate_action(state, action)

    scenario = state.scenario
    nxt = state.copy()
    t = state.t

    # Credit the value unloaded at this slice's start (computed by the call
    # that produced ``state``) and surface the matching events.
    reward = state.pending_reward
    events: list[Event] = list(state.pending_events)
    nxt.pending_reward = 0.0
    nxt.pending_events = []

    # Assign phase: load chosen requests.
    for m in sorted(action.request_actions):
        k = action.request_actions[m]
        if k == DEFER:
            continue
        req = scenario.requests[m]
        nxt.states[m] = RequestState.PICKED
        nxt.carriers[m] = k
        nxt.vehicles[k].space -= req.volume
        events.append(Event("pickup", t, request=m, vehicle=k, station=req.origin))

    # Dispatch phase: the full leg cost is charged now.
    for k in sorted(action.vehicle_actions):
        dest = action.vehicle_actions[k]
        v = nxt.vehicles[k]
        frm = v.station
        leg = scenario.graph.travel(frm, dest)
        v.station = dest
        v.remaining = leg
        if leg > 0:
            reward -= scenario.cost_rate * leg
            events.append(Event("dispatch", t, vehicle=k, origin=frm, station=dest, leg=leg))

    nxt.objective += reward
    nxt.t = t + 1
    done = nxt.t == scenario.horizon

    if not done:
        # Travel and unload phases of the next slice, bringing the state to
        # its decision point.  The value unloaded here stays pending until
        # the next call.
        for k, v in enumerate(nxt.vehicles):
            if v.remaining > 0:
                v.remaining -= 1
                if v.remaining == 0:
                    nxt.pending_events.append(
                        Event("arrival", nxt.t, vehicle=k, station=v.station)
                    )
        for k, v in enumerate(nxt.vehicles):
            if v.remaining != 0:
                continue
            for m, st in enumerate(nxt.states):
                if (
                    st == RequestState.PICKED
                    and nxt.carriers[m] == k
                    and scenario.requests[m].destination == v.station
                ):
                    req = scenario.requests[m]
                    nxt.states[m] = RequestState.DELIVERED
                    v.space += req.volume
                    nxt.delivered += 1
                    nxt.pending_reward += req.value
                    nxt.pending_events.append(
                        Event(
                            "delivery",
                            nxt.t,
                            request=m,
                            vehicle=k,
                            station=v.station,
                            value=req.value,
                        )
                    )

    return StepResult(next_state=nxt, reward=reward, done=done, events=events)


def action_masks(state: WorldState) -> ActionMasks:
    """Feasibility tables for the current slice; see ActionMasks."""
    vehicles = state.vehicles
    n_vehicles = len(vehicles)
    n_stations = state.scenario.station_count

    request_masks: dict[int, np.ndarray] = {}
    for m in state.decidable_requests():
        req = state.scenario.requests[m]
        row = np.zeros(n_vehicles + 1, dtype=bool)
        for k, v in enumerate(vehicles):
            row[k] = (
                v.remaining == 0 and v.station == req.origin and v.space >= req.volume
            )
        row[n_vehicles] = True  # DEFER is always open
        request_masks[m] = row

    vehicle_masks = np.zeros((n_vehicles, n_stations), dtype=bool)
    for k, v in enumerate(vehicles):
        if v.remaining == 0:
            vehicle_masks[k, :] = True
    return ActionMasks(request_masks=request_masks, vehicle_masks=vehicle_masks)


def null_action(state: WorldState) -> JointAction:
    """Defer every request and keep every standing vehicle where it is."""
    return JointAction(
        request_actions={m: DEFER for m in state.decidable_requests()},
        vehicle_actions={k: state.vehicles[k].station for k in state.decidable_vehicles()},
    )


def random_policy(state: WorldState, rng: np.random.Generator) -> JointAction:
    """Uniform feasible action, honoring cumulative capacity within the slice."""
    request_actions: dict[int, int] = {}
    committed = [0] * len(state.vehicles)
    for m in state.decidable_requests():
        req = state.scenario.requests[m]
        options = [
            k
            for k, v in enumerate(state.vehicles)
            if v.remaining == 0
            and v.station == req.origin
            and v.space - committed[k] >= req.volume
        ]
        options.append(DEFER)
        choice = options[int(rng.integers(len(options)))]
        if choice != DEFER:
            committed[choice] += req.volume
        request_actions[m] = choice
    n = state.scenario.station_count
    vehicle_actions = {
        k: int(rng.integers(n)) for k in state.decidable_vehicles()
    }
    return JointAction(request_actions=request_actions, vehicle_actions=vehicle_actions)


def run_episode(scenario: Scenario, policy, seed: int = 0) -> EpisodeSummary:
    """Roll one full episode.

    ``policy`` is called as ``policy(state, rng)`` each slice and must return a
    JointAction covering every decidable entity.  The rng is seeded from
    ``seed``, so stochastic policies replay identically for the same seed.
    """
    rng = np.random.default_rng(seed)
    state = reset(scenario, seed)
    rewards: list[float] = []
    start = _time.perf_counter()
    done = scenario.horizon == 0
    while not done:
        action = policy(state, rng)
        result = step(state, action)
        rewards.append(result.reward)
        state = result.next_state
        done = result.done
    wall = _time.perf_counter() - start
    m = scenario.request_count
    return EpisodeSummary(
        objective=state.objective,
        delivered=state.delivered,
        request_count=m,
        completion=(state.delivered / m) if m else 1.0,
        steps=state.t,
        seed=seed,
        rewards=rewards,
        wall_seconds=wall,
    )
