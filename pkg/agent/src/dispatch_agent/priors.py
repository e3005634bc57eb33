"""Hand-computed action weightings, recomputed from wire observations.

The decoded action distribution is multiplied by these weights before
sampling, so decisions lean toward balanced vehicle loads and short
approach legs without the network having to rediscover either from
scratch.  Weights are raw; the caller renormalizes over whatever is
feasible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .obs import EpisodeContext, Observation, RequestView


@dataclass
class PriorConfig:
    defer_weight: float = 0.03
    pickup_scale: float = 0.1


DEFAULT_PRIOR = PriorConfig()


def vehicle_choice_weights(
    obs: Observation,
    req: RequestView,
    config: PriorConfig = DEFAULT_PRIOR,
    committed: Sequence[int] | None = None,
) -> np.ndarray:
    """Weights over (vehicles..., defer) for assigning one request.

    A standing vehicle at the pickup station with room left weighs its
    free-space fraction, where free space is reduced by volume already
    committed to it this slice.  Everything else weighs zero.  The final
    slot is the defer action.
    """
    n = len(obs.vehicles)
    w = np.zeros(n + 1, dtype=np.float64)
    for k, v in enumerate(obs.vehicles):
        free = v.space - (committed[k] if committed else 0)
        if v.distance == 0 and v.station == req.origin and free >= req.volume:
            w[k] = free / v.capacity
    w[n] = config.defer_weight
    return w


def destination_weights(
    obs: Observation,
    ctx: EpisodeContext,
    k: int,
    config: PriorConfig = DEFAULT_PRIOR,
    extra_onboard: Iterable[int] = (),
    claimed: Iterable[int] = (),
) -> np.ndarray:
    """Weights over stations for dispatching vehicle `k`.

    A station holding cargo this vehicle can drop weighs 1.  Otherwise a
    station with a waiting pickup that still fits weighs
    pickup_scale * (mean network distance) / distance, and 1 when the
    vehicle is already there.  If nothing weighs anything, fall back to
    uniform.

    `extra_onboard` are request ids being loaded onto `k` this slice;
    `claimed` are ids being loaded onto any vehicle, hence no longer
    awaiting pickup.
    """
    extra_onboard = set(extra_onboard)
    claimed = set(claimed)
    n = ctx.station_count
    w = np.zeros(n, dtype=np.float64)

    deliverable = set()
    loaded_volume = 0
    for req in obs.requests:
        if req.state == "picked" and req.carrier == k:
            deliverable.add(req.destination)
        if req.id in extra_onboard:
            deliverable.add(req.destination)
            loaded_volume += req.volume

    free = obs.vehicles[k].space - loaded_volume
    pickup_stations = set()
    for req in obs.requests:
        if req.state == "unassigned" and req.id not in claimed and req.volume <= free:
            pickup_stations.add(req.origin)

    here = obs.vehicles[k].station
    mean_e = ctx.mean_distance()
    for i in range(n):
        if i in deliverable:
            w[i] = 1.0
        elif i in pickup_stations:
            e = ctx.travel(here, i)
            w[i] = 1.0 if e == 0 else config.pickup_scale * mean_e / e
    if not w.any():
        return np.full(n, 1.0 / n)
    return w
