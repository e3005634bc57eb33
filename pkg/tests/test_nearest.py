"""Nearest-target baseline: assignment order and dispatch tie rules."""

import numpy as np

from dpdpsim.core import (
    DEFER,
    Request,
    RequestState,
    Scenario,
    StationGraph,
    Vehicle,
    VehicleSpec,
    WorldState,
)
from dpdpsim.sim import reset, run_episode, step
from dpdpsim.solvers import NearestPolicy, nearest_act


def world(distance, vehicles, requests, t=1):
    scenario = Scenario(
        graph=StationGraph(np.array(distance)),
        fleet=[VehicleSpec(station=v[0], capacity=v[1]) for v in vehicles],
        requests=requests,
        horizon=20,
    )
    return WorldState(
        scenario=scenario,
        t=t,
        vehicles=[
            Vehicle(capacity=cap, space=space, station=st, remaining=rem)
            for st, cap, space, rem in vehicles
        ],
        states=[RequestState.UNASSIGNED] * len(requests),
        carriers=[-1] * len(requests),
    )


# Distances from station 0: 2 to station 1, 5 to station 2, 4 to station 3.
FOUR_STATIONS = np.array(
    [
        [0, 2, 5, 4],
        [2, 0, 3, 4],
        [5, 3, 0, 4],
        [4, 4, 4, 0],
    ]
)


def test_moves_to_closer_pickup():
    state = world(
        FOUR_STATIONS,
        [(0, 2, 2, 0)],
        [Request(1, 2, 1.0, 1, 0), Request(2, 1, 1.0, 1, 0)],
    )
    # Waiting pickups at distance 2 and distance 5: take the short hop.
    assert nearest_act(state).vehicle_actions[0] == 1


def test_equidistant_pickups_break_to_lower_index():
    distance = np.array(
        [
            [0, 4, 4, 1],
            [4, 0, 4, 3],
            [4, 4, 0, 3],
            [1, 3, 3, 0],
        ]
    )
    state = world(
        distance,
        [(0, 2, 2, 0)],
        [Request(2, 1, 1.0, 1, 0), Request(1, 2, 1.0, 1, 0)],
    )
    # Stations 1 and 2 both sit 4 away; the tie goes to station 1.
    assert nearest_act(state).vehicle_actions[0] == 1


def test_drop_beats_pickup_at_equal_distance():
    # From station 3 every other station is 4 away.  The onboard drop at
    # station 2 must beat the waiting pickup at station 0 despite the pickup
    # station's lower index.
    state = world(
        FOUR_STATIONS,
        [(3, 2, 1, 0)],
        [Request(3, 2, 1.0, 1, 0), Request(0, 1, 1.0, 1, 0)],
    )
    state.states[0] = RequestState.PICKED
    state.carriers[0] = 0
    assert nearest_act(state).vehicle_actions[0] == 2


def test_assigns_to_lowest_index_fitting_vehicle():
    state = world(
        FOUR_STATIONS,
        [(1, 1, 0, 0), (1, 2, 2, 0), (1, 3, 3, 0)],
        [Request(1, 2, 1.0, 1, 0)],
    )
    # Vehicle 0 is full, vehicle 1 is the first with room.
    assert nearest_act(state).request_actions[0] == 1


def test_same_slice_capacity_is_respected():
    state = world(
        FOUR_STATIONS,
        [(1, 1, 1, 0)],
        [Request(1, 2, 1.0, 1, 0), Request(1, 3, 1.0, 1, 0)],
    )
    action = nearest_act(state)
    assert action.request_actions[0] == 0
    assert action.request_actions[1] == DEFER


def test_stays_put_without_targets():
    state = world(FOUR_STATIONS, [(2, 1, 1, 0)], [])
    assert nearest_act(state).vehicle_actions[0] == 2


def test_destination_ignores_same_slice_assignments():
    # The request picked up this very slice does not yet count as droppable
    # cargo; with nothing else visible the vehicle stays where it is.
    state = world(FOUR_STATIONS, [(1, 1, 1, 0)], [Request(1, 2, 1.0, 1, 0)])
    action = nearest_act(state)
    assert action.request_actions[0] == 0
    assert action.vehicle_actions[0] == 1


def test_policy_runs_full_episode(two_station_scenario):
    s = two_station_scenario(horizon=6, appear=0)
    summary = run_episode(s, NearestPolicy(), seed=0)
    assert summary.delivered == 1
    assert summary.objective == 5.0


def test_actions_always_validate(two_station_scenario):
    s = two_station_scenario(horizon=10, appear=0, capacity=2)
    s.requests.append(Request(origin=1, destination=0, value=1.0, volume=1, appear=3))
    state = reset(s)
    done = False
    while not done:
        result = step(state, nearest_act(state))
        state = result.next_state
        done = result.done
