"""Exact optimum for tiny static windows.

Branch and bound over per-slice joint actions: every slice, each idle
vehicle chooses a set of co-located pickups and a destination (staying put
included).  Movement charges cost when the leg starts; cargo unloads the
slice the vehicle arrives, crediting value if that still falls inside the
window.  Since pickups and deliveries are free, no completion can ever be
worth more than the total request value minus movement already paid, which
gives the admissible pruning bound.

Objectives are computed canonically (value summed in request order, cost as
one multiply over the integer leg total) so equal schedules produce equal
floats regardless of search order.

The search space is the full joint-action tree, so runtime explodes
quickly; `ExactLimits` refuses anything beyond a handful of stations,
vehicles, requests, and slices.
"""

from __future__ import annotations

from dataclasses import dataclass

from .window import Plan, PlanStop, StaticInstance

UNASSIGNED = -1
DELIVERED = -2


@dataclass
class ExactLimits:
    max_stations: int = 4
    max_vehicles: int = 2
    max_requests: int = 3
    max_horizon: int = 8


class InstanceTooLargeError(ValueError):
    """The instance exceeds what exhaustive search can chew through."""


def exact_solve(instance: StaticInstance, limits: ExactLimits | None = None) -> Plan:
    """Globally optimal plan for a tiny instance.

    Raises InstanceTooLargeError when the instance does not fit the limits.
    """
    if limits is None:
        limits = ExactLimits()
    if (
        instance.station_count > limits.max_stations
        or len(instance.vehicles) > limits.max_vehicles
        or len(instance.requests) > limits.max_requests
        or instance.window_length > limits.max_horizon
    ):
        raise InstanceTooLargeError(
            f"instance with {instance.station_count} stations, "
            f"{len(instance.vehicles)} vehicles, {len(instance.requests)} requests, "
            f"window {instance.window_length} exceeds exact-search limits"
        )

    graph = instance.graph
    horizon = instance.window_length
    requests = instance.requests
    cost_rate = instance.cost_rate
    n_veh = len(instance.vehicles)
    total_value = sum(r.value for r in requests)

    # phase per request: UNASSIGNED, DELIVERED, or the carrying vehicle index.
    init_phase = [UNASSIGNED] * len(requests)
    for k, veh in enumerate(instance.vehicles):
        for m in veh.preload:
            init_phase[m] = k
    init_station = [v.station for v in instance.vehicles]
    init_remaining = [v.join_time for v in instance.vehicles]

    best_obj = float("-inf")
    best_seq: list | None = None

    def free_space(k: int, phase: list[int]) -> int:
        used = sum(requests[m].volume for m in range(len(requests)) if phase[m] == k)
        return instance.vehicles[k].capacity - used

    def vehicle_options(k: int, station: list[int], phase: list[int], pool: set[int]):
        """(pickup tuple, destination) choices for one idle vehicle."""
        here = station[k]
        local = [
            m
            for m in sorted(pool)
            if phase[m] == UNASSIGNED and requests[m].origin == here
        ]
        space = free_space(k, phase)
        subsets = []
        for mask in range(1 << len(local)):
            chosen = [local[i] for i in range(len(local)) if mask >> i & 1]
            if sum(requests[m].volume for m in chosen) <= space:
                subsets.append(tuple(chosen))
        subsets.sort(key=len, reverse=True)

        options = []
        onboard_dests = [
            requests[m].destination for m in range(len(requests)) if phase[m] == k
        ]
        for sub in subsets:
            # Heading for cargo aboard after this pickup tends to be good,
            # so try those destinations first and let the bound prune the rest.
            cargo = onboard_dests + [requests[m].destination for m in sub]
            waiting = [
                requests[m].origin
                for m in range(len(requests))
                if phase[m] == UNASSIGNED and m not in sub
            ]
            ordered: list[int] = []
            for s in cargo + waiting + [here] + list(range(instance.station_count)):
                if s not in ordered:
                    ordered.append(s)
            options.extend((sub, dest) for dest in ordered)
        return options

    def delivered_value(phase) -> float:
        return sum(
            requests[m].value for m in range(len(requests)) if phase[m] == DELIVERED
        )

    def search(t, station, remaining, phase, legs, seq):
        nonlocal best_obj, best_seq
        if total_value - cost_rate * legs <= best_obj:
            return
        if t == horizon:
            obj = delivered_value(phase) - cost_rate * legs
            if obj > best_obj:
                best_obj = obj
                best_seq = [list(s) for s in seq]
            return

        idle = [k for k in range(n_veh) if remaining[k] == 0]

        def assign(i, station2, phase2, pool, legs2, acts):
            if i == len(idle):
                st3 = list(station2)
                rem3 = list(remaining)
                ph3 = list(phase2)
                for k, (_, dest, leg) in zip(idle, acts):
                    rem3[k] = leg
                for k in range(n_veh):
                    if rem3[k] > 0:
                        rem3[k] -= 1
                if t + 1 < horizon:
                    for k in range(n_veh):
                        if rem3[k] != 0:
                            continue
                        for m in range(len(requests)):
                            if ph3[m] == k and requests[m].destination == st3[k]:
                                ph3[m] = DELIVERED
                seq.append(list(acts))
                search(t + 1, st3, rem3, ph3, legs2, seq)
                seq.pop()
                return
            k = idle[i]
            for sub, dest in vehicle_options(k, station2, phase2, pool):
                leg = graph.travel(station2[k], dest)
                ph2 = list(phase2)
                for m in sub:
                    ph2[m] = k
                st2 = list(station2)
                st2[k] = dest
                acts.append((sub, dest, leg))
                assign(i + 1, st2, ph2, pool - set(sub), legs2 + leg, acts)
                acts.pop()

        assign(0, station, phase, set(range(len(requests))), legs, [])

    search(0, init_station, init_remaining, init_phase, 0, [])

    assert best_seq is not None
    plan = _replay(instance, best_seq)
    assert abs(plan.objective - best_obj) < 1e-9
    plan.objective = best_obj
    return plan


def _replay(instance: StaticInstance, seq: list) -> Plan:
    """Re-run a joint-action sequence, collecting stops into a Plan."""
    graph = instance.graph
    requests = instance.requests
    n_veh = len(instance.vehicles)
    station = [v.station for v in instance.vehicles]
    remaining = [v.join_time for v in instance.vehicles]
    phase = [UNASSIGNED] * len(requests)
    for k, veh in enumerate(instance.vehicles):
        for m in veh.preload:
            phase[m] = k

    stops: list[dict[int, PlanStop]] = [{} for _ in range(n_veh)]

    def stop_at(k: int, t: int) -> PlanStop:
        if t not in stops[k]:
            stops[k][t] = PlanStop(time=t, station=station[k])
        return stops[k][t]

    delivered: set[int] = set()
    for t, joint in enumerate(seq):
        idle = [k for k in range(n_veh) if remaining[k] == 0]
        for k, (sub, dest, leg) in zip(idle, joint):
            if sub:
                stop_at(k, t).pickups.extend(sub)
                for m in sub:
                    phase[m] = k
            station[k] = dest
            remaining[k] = leg
        for k in range(n_veh):
            if remaining[k] > 0:
                remaining[k] -= 1
        if t + 1 >= instance.window_length:
            continue
        for k in range(n_veh):
            if remaining[k] != 0:
                continue
            for m in range(len(requests)):
                if phase[m] == k and requests[m].destination == station[k]:
                    phase[m] = DELIVERED
                    delivered.add(m)
                    stop_at(k, t + 1).deliveries.append(m)

    routes = []
    leg_total = 0
    for k in range(n_veh):
        ordered = [stops[k][t] for t in sorted(stops[k])]
        prev = instance.vehicles[k].station
        for s in ordered:
            leg_total += graph.travel(prev, s.station)
            prev = s.station
        routes.append(ordered)
    value = sum(requests[m].value for m in sorted(delivered))
    return Plan(routes=routes, objective=value - instance.cost_rate * leg_total)
