"""Core domain types for the multi-vehicle dynamic pickup-and-delivery problem.

Stations form a fully connected weighted graph with integer travel times.
Vehicles carry cargo between stations; requests appear over time and move
through a three-state life cycle: unassigned -> picked -> delivered.
"""

from __future__ import annotations

import copy as _copy
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

# Action sentinel: leave a request unassigned this slice.
DEFER = -1


class RequestState(IntEnum):
    UNASSIGNED = 0
    PICKED = 1
    DELIVERED = 2

    def label(self) -> str:
        return self.name.lower()


@dataclass
class Request:
    """A transport request.

    Attributes:
        origin: pickup station index.
        destination: drop-off station index.
        value: profit credited on delivery.
        volume: cargo size, counted against vehicle capacity.
        appear: first time slice at which the request is visible.
    """

    origin: int
    destination: int
    value: float
    volume: int
    appear: int


@dataclass
class VehicleSpec:
    """Initial placement and size of one fleet vehicle."""

    station: int
    capacity: int


@dataclass
class Vehicle:
    """Runtime vehicle state.

    ``station`` is the destination while moving and the current station when
    ``remaining`` is zero.  ``space`` is free capacity left after onboard cargo.
    """

    capacity: int
    space: int
    station: int
    remaining: int

    def at_station(self) -> bool:
        return self.remaining == 0


class StationGraph:
    """Fully connected station network with a triangle-closed distance matrix."""

    def __init__(self, distance: np.ndarray):
        self.distance = np.asarray(distance, dtype=np.int64)

    @property
    def count(self) -> int:
        return self.distance.shape[0]

    def travel(self, a: int, b: int) -> int:
        return int(self.distance[a, b])

    def mean_distance(self) -> float:
        # Average over all entries, diagonal included.
        return float(self.distance.mean())


@dataclass
class Scenario:
    """A complete problem instance: network, fleet, requests, horizon, cost."""

    graph: StationGraph
    fleet: list[VehicleSpec]
    requests: list[Request]
    horizon: int
    cost_rate: float = 0.0
    profit_mode: str = "distance"
    name: str = "custom"

    @property
    def station_count(self) -> int:
        return self.graph.count

    @property
    def vehicle_count(self) -> int:
        return len(self.fleet)

    @property
    def request_count(self) -> int:
        return len(self.requests)


@dataclass
class WorldState:
    """Per-episode state at a decision point: travel and unloading for the
    current slice have already happened, assignments and dispatches have not.

    ``pending_reward`` holds the value unloaded on arrival at this decision
    point; it is credited by the next ``step`` call.  ``pending_events`` are
    the matching arrival/delivery records.  ``step`` never mutates its input;
    it copies.
    """

    scenario: Scenario
    t: int
    vehicles: list[Vehicle]
    states: list[RequestState]
    carriers: list[int]
    objective: float = 0.0
    delivered: int = 0
    pending_reward: float = 0.0
    pending_events: list = field(default_factory=list)

    def copy(self) -> "WorldState":
        return WorldState(
            scenario=self.scenario,
            t=self.t,
            vehicles=[_copy.copy(v) for v in self.vehicles],
            states=list(self.states),
            carriers=list(self.carriers),
            objective=self.objective,
            delivered=self.delivered,
            pending_reward=self.pending_reward,
            pending_events=list(self.pending_events),
        )

    def visible_requests(self) -> list[int]:
        """Indices of requests that have appeared by the current slice."""
        t = self.t
        reqs = self.scenario.requests
        return [m for m in range(len(reqs)) if reqs[m].appear <= t]

    def decidable_requests(self) -> list[int]:
        """Visible requests still unassigned, in ascending index order."""
        t = self.t
        reqs = self.scenario.requests
        states = self.states
        return [
            m
            for m in range(len(reqs))
            if reqs[m].appear <= t and states[m] == RequestState.UNASSIGNED
        ]

    def decidable_vehicles(self) -> list[int]:
        """Vehicles standing at a station this slice, in ascending index order."""
        return [k for k, v in enumerate(self.vehicles) if v.remaining == 0]


@dataclass
class JointAction:
    """One decision per decidable request and per decidable vehicle.

    ``request_actions`` maps request index to a vehicle index or DEFER.
    ``vehicle_actions`` maps vehicle index to a destination station.
    """

    request_actions: dict[int, int] = field(default_factory=dict)
    vehicle_actions: dict[int, int] = field(default_factory=dict)


def shortest_path_closure(matrix: np.ndarray) -> np.ndarray:
    """Replace every entry with the length of the shortest path between its nodes.

    Accepts any square non-negative integer matrix; the diagonal is forced to
    zero.  The result satisfies the triangle inequality, so direct travel is
    never slower than a detour.
    """
    m = np.asarray(matrix)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"distance matrix must be square, got shape {m.shape}")
    if np.any(m < 0):
        raise ValueError("distance matrix entries must be non-negative")
    d = m.astype(np.int64, copy=True)
    np.fill_diagonal(d, 0)
    for k in range(d.shape[0]):
        np.minimum(d, d[:, k, None] + d[None, k, :], out=d)
    return d


def objective_value(history, cost_rate: float = 0.0) -> float:
    """Total profit of an episode history.

    ``history`` is an iterable of per-slice pairs ``(delivered_values,
    dispatched_leg_lengths)``.  Each delivery credits its value; each
    dispatched leg costs ``cost_rate`` per distance unit.
    """
    total = 0.0
    for values, legs in history:
        total += float(sum(values)) - cost_rate * float(sum(legs))
    return total


def feasible_request_actions(state: WorldState, m: int) -> list[int]:
    """Actions available for decidable request ``m``: fitting co-located vehicles
    plus DEFER.

    Raises ValueError if the request is not decidable this slice.
    """
    req = state.scenario.requests[m]
    if req.appear > state.t:
        raise ValueError(f"request {m} has not appeared by slice {state.t}")
    if state.states[m] != RequestState.UNASSIGNED:
        raise ValueError(f"request {m} is not unassigned")
    actions = [
        k
        for k, v in enumerate(state.vehicles)
        if v.remaining == 0 and v.station == req.origin and v.space >= req.volume
    ]
    actions.append(DEFER)
    return actions


def feasible_vehicle_destinations(state: WorldState, k: int) -> list[int]:
    """Stations vehicle ``k`` may head to: all of them when standing at a
    station (its own station counts, a zero-length leg), none while moving."""
    v = state.vehicles[k]
    if v.remaining != 0:
        return []
    return list(range(state.scenario.station_count))


def validate_scenario(s: Scenario) -> None:
    """Raise ValueError on any structural defect."""
    d = s.graph.distance
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValueError("distance matrix must be square")
    n = d.shape[0]
    if n < 1:
        raise ValueError("need at least one station")
    if np.any(d < 0):
        raise ValueError("negative travel time")
    if np.any(np.diag(d) != 0):
        raise ValueError("diagonal travel times must be zero")
    closed = shortest_path_closure(d)
    if not np.array_equal(closed, d):
        raise ValueError("distance matrix is not triangle-closed")
    if not s.fleet:
        raise ValueError("fleet is empty")
    for k, spec in enumerate(s.fleet):
        if not 0 <= spec.station < n:
            raise ValueError(f"vehicle {k} starts at unknown station {spec.station}")
        if spec.capacity <= 0:
            raise ValueError(f"vehicle {k} capacity must be positive")
    if s.horizon < 1:
        raise ValueError("horizon must be at least 1")
    if s.cost_rate < 0:
        raise ValueError("cost rate must be non-negative")
    for m, r in enumerate(s.requests):
        if not 0 <= r.origin < n or not 0 <= r.destination < n:
            raise ValueError(f"request {m} references an unknown station")
        if r.volume <= 0:
            raise ValueError(f"request {m} volume must be positive")
        if r.value < 0:
            raise ValueError(f"request {m} value must be non-negative")
        if not 0 <= r.appear <= s.horizon:
            raise ValueError(
                f"request {m} appearance time {r.appear} outside [0, {s.horizon}]"
            )
