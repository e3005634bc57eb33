"""Frozen planning windows and the schedule space shared by all planners.

A window freezes the world at one slice: en-route vehicles join at their
destination after their remaining travel time, cargo already onboard becomes
a preload, visible unassigned requests become plannable, and nothing that has
not appeared yet is included.

Plans live in a stop-schedule space.  A route is a time-ordered list of stops
(time, station, pickups, deliveries); consecutive stops must leave enough
time to travel between their stations, deliveries at a stop free capacity
before pickups consume it, and a request's delivery must come at a stop after
its pickup.  One stop may both unload and load, which matches how the
simulator sequences a slice.

Solvers exchange schedules in assignment form: request index -> None
(unserved) or (vehicle, pickup_time, delivery_time), with pickup_time None
for preloaded cargo.  ``assignment_routes`` turns an assignment into routes
while checking feasibility, and is the single source of truth for what
schedules are legal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..core import StationGraph, WorldState, RequestState

Assignment = dict[int, "tuple[int, int | None, int | None] | None"]


@dataclass
class WindowVehicle:
    """One vehicle as seen by the static window.

    ``join_time`` is the first window slice at which the vehicle can act, at
    ``station``.  ``preload`` lists window request indices already onboard.
    """

    station: int
    capacity: int
    join_time: int = 0
    preload: list[int] = field(default_factory=list)


@dataclass
class WindowRequest:
    origin: int
    destination: int
    value: float
    volume: int
    appear: int = 0


@dataclass
class StaticInstance:
    graph: StationGraph
    window_length: int
    vehicles: list[WindowVehicle]
    requests: list[WindowRequest]
    cost_rate: float = 0.0
    # Global request ids behind each window request; planning itself never
    # looks at these, the rolling-horizon translator does.
    source_ids: list[int] = field(default_factory=list)

    @property
    def station_count(self) -> int:
        return self.graph.count


@dataclass
class PlanStop:
    time: int
    station: int
    pickups: list[int] = field(default_factory=list)
    deliveries: list[int] = field(default_factory=list)


@dataclass
class Plan:
    """One stop schedule per vehicle plus the objective it attains."""

    routes: list[list[PlanStop]]
    objective: float = 0.0


def build_static_window(state: WorldState, horizon: int) -> StaticInstance:
    """Freeze the current state into a static instance.

    The window never extends past the episode end, so a planner cannot be
    tricked into scheduling deliveries the simulator will not run.
    """
    if horizon < 1:
        raise ValueError("window horizon must be at least 1")
    scenario = state.scenario
    length = min(horizon, scenario.horizon - state.t)

    requests: list[WindowRequest] = []
    source_ids: list[int] = []
    preload_of: dict[int, list[int]] = {}

    for m in state.decidable_requests():
        r = scenario.requests[m]
        requests.append(
            WindowRequest(
                origin=r.origin,
                destination=r.destination,
                value=r.value,
                volume=r.volume,
                appear=0,
            )
        )
        source_ids.append(m)

    for m, st in enumerate(state.states):
        if st == RequestState.PICKED:
            r = scenario.requests[m]
            idx = len(requests)
            requests.append(
                WindowRequest(
                    origin=r.origin,
                    destination=r.destination,
                    value=r.value,
                    volume=r.volume,
                    appear=0,
                )
            )
            source_ids.append(m)
            preload_of.setdefault(state.carriers[m], []).append(idx)

    vehicles = [
        WindowVehicle(
            station=v.station,
            capacity=v.capacity,
            join_time=v.remaining,
            preload=preload_of.get(k, []),
        )
        for k, v in enumerate(state.vehicles)
    ]
    return StaticInstance(
        graph=scenario.graph,
        window_length=length,
        vehicles=vehicles,
        requests=requests,
        cost_rate=scenario.cost_rate,
        source_ids=source_ids,
    )


def _route_legs(instance: StaticInstance, k: int, stops: list[PlanStop]) -> int:
    total = 0
    prev = instance.vehicles[k].station
    for stop in stops:
        total += instance.graph.travel(prev, stop.station)
        prev = stop.station
    return total


def assignment_routes(
    instance: StaticInstance, assignment: Assignment
) -> list[list[PlanStop]] | None:
    """Build per-vehicle stop routes for an assignment, or None if infeasible.

    Feasibility covers: times within the window and after the vehicle joins,
    travel gaps between consecutive stops, no two stations at one time, load
    within capacity with deliveries unloading before pickups load, pickup at
    the origin no earlier than appearance, delivery at the destination
    strictly after the pickup, and preloads delivered at most once (their
    pickup time must be None).
    """
    per_vehicle: list[dict[int, dict[str, list[int]]]] = [
        {} for _ in instance.vehicles
    ]

    preload_carrier: dict[int, int] = {}
    for k, veh in enumerate(instance.vehicles):
        for m in veh.preload:
            preload_carrier[m] = k

    for m, entry in assignment.items():
        if entry is None:
            continue  # unserved; preloads simply ride along
        k, pt, dt = entry
        if not 0 <= k < len(instance.vehicles):
            return None
        if m in preload_carrier:
            if pt is not None or k != preload_carrier[m]:
                return None
            if dt is None:
                continue
        else:
            if pt is None:
                return None
            if dt is not None and dt <= pt:
                return None
        slots = per_vehicle[k]
        if pt is not None:
            slots.setdefault(pt, {"p": [], "d": []})["p"].append(m)
        if dt is not None:
            slots.setdefault(dt, {"p": [], "d": []})["d"].append(m)

    routes: list[list[PlanStop]] = []
    for k, veh in enumerate(instance.vehicles):
        slots = per_vehicle[k]
        stops: list[PlanStop] = []
        load = sum(instance.requests[m].volume for m in veh.preload)
        if load > veh.capacity:
            return None
        onboard = set(veh.preload)
        prev_time, prev_station = veh.join_time, veh.station

        for t in sorted(slots):
            acts = slots[t]
            stations = {
                instance.requests[m].destination for m in acts["d"]
            } | {instance.requests[m].origin for m in acts["p"]}
            if len(stations) != 1:
                return None
            station = stations.pop()
            if t >= instance.window_length or t < veh.join_time:
                return None
            gap = t - prev_time
            if station != prev_station and gap <= 0:
                return None  # moving takes at least one slice
            if gap < instance.graph.travel(prev_station, station):
                return None

            stop = PlanStop(time=t, station=station)
            for m in sorted(acts["d"]):
                req = instance.requests[m]
                if m not in onboard or req.destination != station:
                    return None
                onboard.discard(m)
                load -= req.volume
                stop.deliveries.append(m)
            for m in sorted(acts["p"]):
                req = instance.requests[m]
                if req.origin != station or t < req.appear:
                    return None
                load += req.volume
                if load > veh.capacity:
                    return None
                onboard.add(m)
                stop.pickups.append(m)
            stops.append(stop)
            prev_time, prev_station = t, station
        routes.append(stops)
    return routes


def assignment_objective(instance: StaticInstance, assignment: Assignment) -> float | None:
    """Objective of an assignment, or None if it is infeasible."""
    routes = assignment_routes(instance, assignment)
    if routes is None:
        return None
    value = 0.0
    for m, entry in assignment.items():
        if entry is not None and entry[2] is not None:
            value += instance.requests[m].value
    cost = sum(
        _route_legs(instance, k, stops) for k, stops in enumerate(routes)
    )
    return value - instance.cost_rate * cost


def assignment_plan(instance: StaticInstance, assignment: Assignment) -> Plan:
    """Materialize a feasible assignment into a Plan; raises if infeasible."""
    routes = assignment_routes(instance, assignment)
    if routes is None:
        raise ValueError("assignment is not schedulable")
    obj = assignment_objective(instance, assignment)
    assert obj is not None
    return Plan(routes=routes, objective=obj)


def empty_assignment(instance: StaticInstance) -> Assignment:
    """Everything unserved; preloads ride along undelivered."""
    return {m: None for m in range(len(instance.requests))}


def preload_carriers(instance: StaticInstance) -> dict[int, int]:
    return {
        m: k for k, veh in enumerate(instance.vehicles) for m in veh.preload
    }


def sample_entry(
    instance: StaticInstance,
    assignment: Assignment,
    m: int,
    rng,
    attempts: int = 20,
):
    """Draw a random feasible service entry for request m, or None.

    Preloaded requests only get a delivery time on their carrier; everything
    else gets a random vehicle and random pickup/delivery times.  Candidates
    are checked against the rest of the assignment as it stands, and the
    first feasible one wins.
    """
    carriers = preload_carriers(instance)
    h = instance.window_length
    trial = dict(assignment)
    for _ in range(attempts):
        if m in carriers:
            k = carriers[m]
            pt = None
            dt = int(rng.integers(0, h))
        else:
            k = int(rng.integers(0, len(instance.vehicles)))
            if h < 2:
                return None
            pt = int(rng.integers(0, h - 1))
            dt = int(rng.integers(pt + 1, h))
        trial[m] = (k, pt, dt)
        if assignment_routes(instance, trial) is not None:
            return (k, pt, dt)
    return None


def random_assignment(instance: StaticInstance, rng, attempts: int = 8) -> Assignment:
    """A random feasible assignment: requests inserted in random order, each
    given a few random placements, left unserved when none sticks."""
    assignment = empty_assignment(instance)
    order = list(range(len(instance.requests)))
    rng.shuffle(order)
    for m in order:
        entry = sample_entry(instance, assignment, m, rng, attempts)
        if entry is not None:
            assignment[m] = entry
    return assignment


def validate_plan(instance: StaticInstance, plan: Plan) -> list[str]:
    """All violations of the plan invariants, empty when the plan is sound."""
    problems: list[str] = []
    if len(plan.routes) != len(instance.vehicles):
        return [
            f"plan has {len(plan.routes)} routes for {len(instance.vehicles)} vehicles"
        ]
    picked: dict[int, int] = {}
    delivered: dict[int, int] = {}
    for k, stops in enumerate(plan.routes):
        veh = instance.vehicles[k]
        load = sum(instance.requests[m].volume for m in veh.preload)
        onboard = set(veh.preload)
        prev_time, prev_station = veh.join_time, veh.station
        for i, stop in enumerate(stops):
            if stop.time < veh.join_time or stop.time >= instance.window_length:
                problems.append(f"vehicle {k} stop at time {stop.time} outside window")
            if i > 0 and stop.time <= prev_time:
                problems.append(f"vehicle {k} stops out of order at time {stop.time}")
            gap = stop.time - prev_time
            if stop.station != prev_station and gap <= 0:
                problems.append(
                    f"vehicle {k} teleports to station {stop.station} at {stop.time}"
                )
            required = instance.graph.travel(prev_station, stop.station)
            if gap < required:
                problems.append(
                    f"vehicle {k} needs {required} slices to reach {stop.station}, has {gap}"
                )
            for m in stop.deliveries:
                req = instance.requests[m]
                if m in delivered:
                    problems.append(f"request {m} delivered twice")
                delivered[m] = k
                if m not in onboard:
                    problems.append(f"request {m} delivered while not onboard vehicle {k}")
                if req.destination != stop.station:
                    problems.append(
                        f"request {m} delivered at {stop.station}, destination {req.destination}"
                    )
                onboard.discard(m)
                load -= req.volume
            for m in stop.pickups:
                req = instance.requests[m]
                if m in picked:
                    problems.append(f"request {m} picked twice")
                picked[m] = k
                if req.origin != stop.station:
                    problems.append(
                        f"request {m} picked at {stop.station}, origin {req.origin}"
                    )
                if stop.time < req.appear:
                    problems.append(f"request {m} picked before it appears")
                load += req.volume
                onboard.add(m)
            if load > veh.capacity:
                problems.append(
                    f"vehicle {k} over capacity ({load}/{veh.capacity}) at time {stop.time}"
                )
            prev_time, prev_station = stop.time, stop.station
    all_preloads = {m for v in instance.vehicles for m in v.preload}
    for m in delivered:
        if m not in picked and m not in all_preloads:
            problems.append(f"request {m} delivered but never picked or preloaded")
    return problems

