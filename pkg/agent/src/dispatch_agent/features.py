"""Dense feature vectors and pairwise relation tables for the policy.

Entities are referred to by (kind, index) pairs; the canonical encoding
order is requests, vehicles, stations, then one global slot.  Features
are passed through raw; any conditioning scale (distances by the mean
network distance, times by the horizon) is applied by the network right
before its input projections.

Relations between two entities are either a category (request state,
whether a station is a vehicle's destination, whether a station is a
request's endpoint) or a travel distance passed through one shared
linear map.  The global slot, and tokens with no entity behind them,
relate to everything with a fixed zero bias.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .obs import EpisodeContext, Observation

KIND_REQUEST = 0
KIND_VEHICLE = 1
KIND_STATION = 2
KIND_GLOBAL = 3
KIND_DEFER = 4

# Relation codes.  0 is a hard zero bias; 1..8 index learned category
# scalars; 9 routes the cell's distance value through the shared linear map.
REL_ZERO = 0
REL_UNASSIGNED = 1
REL_PICKED = 2
REL_DELIVERED = 3
REL_IS_DESTINATION = 4
REL_NOT_DESTINATION = 5
REL_FROM = 6
REL_TO = 7
REL_UNRELATED = 8
REL_DISTANCE = 9

RELATION_CATEGORIES = 8

_STATE_CODES = {"unassigned": REL_UNASSIGNED, "picked": REL_PICKED, "delivered": REL_DELIVERED}


@dataclass
class DenseInputs:
    """Raw per-entity feature rows, one array per entity class."""

    stations: np.ndarray
    vehicles: np.ndarray
    requests: np.ndarray
    global_info: np.ndarray

    def __len__(self) -> int:
        return len(self.requests) + len(self.vehicles) + len(self.stations) + 1


def featurize(obs: Observation) -> DenseInputs:
    """Concatenate the raw observation scalars into per-entity rows.

    Stations carry their unassigned-origin and open-destination counts,
    vehicles capacity/free space/slices to arrival, requests value and
    volume, and the global row the slice index and visible request count.
    """
    stations = np.stack([obs.ori, obs.dest], axis=1).astype(np.float64)
    vehicles = np.array(
        [[v.capacity, v.space, v.distance] for v in obs.vehicles], dtype=np.float64
    ).reshape(len(obs.vehicles), 3)
    requests = np.array(
        [[r.value, r.volume] for r in obs.requests], dtype=np.float64
    ).reshape(len(obs.requests), 2)
    global_info = np.array([obs.t, obs.m_t], dtype=np.float64)
    return DenseInputs(
        stations=stations, vehicles=vehicles, requests=requests, global_info=global_info
    )


@dataclass(frozen=True)
class EntitySet:
    """A parallel (kind, index) encoding of an entity list."""

    kinds: np.ndarray
    index: np.ndarray

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, int]]) -> "EntitySet":
        pairs = list(pairs)
        kinds = np.array([p[0] for p in pairs], dtype=np.int64)
        index = np.array([p[1] for p in pairs], dtype=np.int64)
        return cls(kinds=kinds, index=index)

    def __len__(self) -> int:
        return len(self.kinds)


def entity_sequence(obs: Observation) -> EntitySet:
    """The canonical encoder ordering: requests, vehicles, stations, global."""
    pairs = [(KIND_REQUEST, pos) for pos in range(len(obs.requests))]
    pairs += [(KIND_VEHICLE, k) for k in range(len(obs.vehicles))]
    pairs += [(KIND_STATION, i) for i in range(len(obs.ori))]
    pairs.append((KIND_GLOBAL, 0))
    return EntitySet.from_pairs(pairs)


def relation_tensors(
    query: EntitySet, keys: EntitySet, obs: Observation, ctx: EpisodeContext
) -> tuple[np.ndarray, np.ndarray]:
    """Relation codes and distance values for every query/key pair.

    Returns (codes, values), both shaped (len(query), len(keys)).
    Distance values are pre-scaled by the mean network distance so the
    shared linear map sees inputs near unit scale.
    """
    req_origin = np.array([r.origin for r in obs.requests], dtype=np.int64)
    req_destination = np.array([r.destination for r in obs.requests], dtype=np.int64)
    req_state = np.array(
        [_STATE_CODES[r.state] for r in obs.requests], dtype=np.int64
    )
    veh_station = np.array([v.station for v in obs.vehicles], dtype=np.int64)

    mean_e = ctx.mean_distance()
    scale = 1.0 / mean_e if mean_e > 0 else 1.0
    distances = ctx.distances.astype(np.float64) * scale

    def station_anchor(entities: EntitySet) -> np.ndarray:
        """Station each entity occupies for distance cells (-1 if none)."""
        anchor = np.full(len(entities), -1, dtype=np.int64)
        is_req = entities.kinds == KIND_REQUEST
        is_veh = entities.kinds == KIND_VEHICLE
        is_sta = entities.kinds == KIND_STATION
        anchor[is_req] = req_origin[entities.index[is_req]]
        anchor[is_veh] = veh_station[entities.index[is_veh]]
        anchor[is_sta] = entities.index[is_sta]
        return anchor

    qk = query.kinds[:, None]
    kk = keys.kinds[None, :]
    qi = query.index[:, None]
    ki = keys.index[None, :]

    codes = np.zeros((len(query), len(keys)), dtype=np.int64)
    values = np.zeros((len(query), len(keys)), dtype=np.float64)

    # Same-kind pairs relate by distance: request origins, vehicle
    # destinations, or the stations themselves.
    q_anchor = station_anchor(query)[:, None]
    k_anchor = station_anchor(keys)[None, :]
    same = (qk == kk) & np.isin(query.kinds, (KIND_REQUEST, KIND_VEHICLE, KIND_STATION))[:, None]
    codes[same] = REL_DISTANCE
    values[same] = distances[
        np.broadcast_to(q_anchor, same.shape)[same],
        np.broadcast_to(k_anchor, same.shape)[same],
    ]

    # Vehicle/request pairs carry the request's lifecycle state.
    for a, b, ridx in (
        (KIND_VEHICLE, KIND_REQUEST, np.broadcast_to(ki, codes.shape)),
        (KIND_REQUEST, KIND_VEHICLE, np.broadcast_to(qi, codes.shape)),
    ):
        cells = (qk == a) & (kk == b)
        codes[cells] = req_state[ridx[cells]]

    # Vehicle/station pairs say whether the station is where it is headed.
    for a, b, vidx, sidx in (
        (KIND_VEHICLE, KIND_STATION, np.broadcast_to(qi, codes.shape), np.broadcast_to(ki, codes.shape)),
        (KIND_STATION, KIND_VEHICLE, np.broadcast_to(ki, codes.shape), np.broadcast_to(qi, codes.shape)),
    ):
        cells = (qk == a) & (kk == b)
        is_dest = veh_station[vidx[cells]] == sidx[cells]
        codes[cells] = np.where(is_dest, REL_IS_DESTINATION, REL_NOT_DESTINATION)

    # Request/station pairs: pickup end, drop-off end, or neither.  The
    # pickup end wins for a degenerate request whose ends coincide.
    for a, b, ridx, sidx in (
        (KIND_REQUEST, KIND_STATION, np.broadcast_to(qi, codes.shape), np.broadcast_to(ki, codes.shape)),
        (KIND_STATION, KIND_REQUEST, np.broadcast_to(ki, codes.shape), np.broadcast_to(qi, codes.shape)),
    ):
        cells = (qk == a) & (kk == b)
        r = ridx[cells]
        s = sidx[cells]
        codes[cells] = np.where(
            req_origin[r] == s,
            REL_FROM,
            np.where(req_destination[r] == s, REL_TO, REL_UNRELATED),
        )

    return codes, values
