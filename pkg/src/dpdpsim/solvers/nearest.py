"""Greedy nearest-target dispatch baseline."""

from __future__ import annotations

import numpy as np

from ..core import DEFER, JointAction, RequestState, WorldState


def nearest_act(state: WorldState) -> JointAction:
    """Assign each waiting request to the lowest-index fitting vehicle at its
    origin, then send every standing vehicle to the nearest station where the
    observed state gives it business.

    Targets come from the state as observed: droppable stations are those of
    cargo already onboard, pickup stations those of currently unassigned
    visible requests the vehicle has room for.  Assignments made in the same
    slice are deliberately not folded in; the destination choice is a pure
    function of the observation.  A droppable station beats a pickup station
    at equal distance; remaining ties break toward the lower station index.
    With no target the vehicle stays put.
    """
    scenario = state.scenario
    vehicles = state.vehicles
    committed = [0] * len(vehicles)

    request_actions: dict[int, int] = {}
    for m in state.decidable_requests():
        req = scenario.requests[m]
        chosen = DEFER
        for k, v in enumerate(vehicles):
            if (
                v.remaining == 0
                and v.station == req.origin
                and v.space - committed[k] >= req.volume
            ):
                chosen = k
                break
        request_actions[m] = chosen
        if chosen != DEFER:
            committed[chosen] += req.volume

    vehicle_actions: dict[int, int] = {}
    for k in state.decidable_vehicles():
        v = vehicles[k]
        drop_stations = {
            scenario.requests[m].destination
            for m, st in enumerate(state.states)
            if st == RequestState.PICKED and state.carriers[m] == k
        }
        pickup_stations = {
            scenario.requests[m].origin
            for m in state.decidable_requests()
            if scenario.requests[m].volume <= v.space
        }

        # (distance, kind, station): kind 0 for drops, 1 for pickups, so the
        # tuple order encodes the drop-beats-pickup tie rule.
        best = None
        for i in sorted(drop_stations):
            cand = (scenario.graph.travel(v.station, i), 0, i)
            if best is None or cand < best:
                best = cand
        for i in sorted(pickup_stations):
            cand = (scenario.graph.travel(v.station, i), 1, i)
            if best is None or cand < best:
                best = cand
        vehicle_actions[k] = v.station if best is None else best[2]

    return JointAction(request_actions=request_actions, vehicle_actions=vehicle_actions)


class NearestPolicy:
    """Deterministic policy wrapper around nearest_act."""

    def __call__(self, state: WorldState, rng: np.random.Generator | None = None) -> JointAction:
        return nearest_act(state)
