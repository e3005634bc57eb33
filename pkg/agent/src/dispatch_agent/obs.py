"""Typed views of what the environment server sends.

The wire format is line-delimited JSON.  A reset answer carries the
episode constants (distance matrix, cost rate, horizon) exactly once;
every later answer repeats only the per-slice observation.  Parsing is
strict: a missing or malformed field raises ProtocolError instead of
guessing a default, because a silent schema drift between server and
client would corrupt training data without any visible failure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFER = -1

REQUEST_STATES = ("unassigned", "picked", "delivered")


class ProtocolError(Exception):
    """The server answered with an error, or with something unreadable."""


def _need(doc: dict, key: str):
    try:
        return doc[key]
    except (KeyError, TypeError):
        raise ProtocolError(f"missing field {key!r}") from None


@dataclass(frozen=True)
class EpisodeContext:
    """Constants of the running episode, captured from the reset answer."""

    scenario: str
    distances: np.ndarray
    cost_rate: float
    horizon: int

    @property
    def station_count(self) -> int:
        return int(self.distances.shape[0])

    def mean_distance(self) -> float:
        # Average over every entry, diagonal included.
        return float(self.distances.mean())

    def travel(self, a: int, b: int) -> int:
        return int(self.distances[a, b])


@dataclass(frozen=True)
class VehicleView:
    """One vehicle as observed: `station` is the destination while moving."""

    capacity: int
    space: int
    station: int
    distance: int


@dataclass(frozen=True)
class RequestView:
    id: int
    origin: int
    destination: int
    value: float
    volume: int
    appear: int
    state: str
    carrier: int | None


@dataclass
class Observation:
    """One slice as the server reports it.

    `request_masks` has a row per decidable request, over vehicle slots
    plus a final always-true defer slot.  `vehicle_masks` has a row per
    vehicle over stations; an all-false row means the vehicle is still
    en route and takes no action this slice.
    """

    t: int
    m_t: int
    scenario: str
    vehicles: list[VehicleView]
    requests: list[RequestView]
    ori: np.ndarray
    dest: np.ndarray
    request_masks: dict[int, np.ndarray]
    vehicle_masks: np.ndarray

    def decidable_requests(self) -> list[int]:
        return sorted(self.request_masks)

    def decidable_vehicles(self) -> list[int]:
        return [k for k in range(len(self.vehicles)) if self.vehicle_masks[k].any()]

    def request_by_id(self, m: int) -> RequestView:
        for req in self.requests:
            if req.id == m:
                return req
        raise KeyError(f"request {m} is not visible")

    def request_position(self, m: int) -> int:
        """Index of request `m` in the observed request list."""
        for pos, req in enumerate(self.requests):
            if req.id == m:
                return pos
        raise KeyError(f"request {m} is not visible")

    def completion_rate(self) -> float:
        """Delivered fraction of the requests that have appeared.
        No requests at all counts as fully served."""
        if not self.requests:
            return 1.0
        delivered = sum(1 for r in self.requests if r.state == "delivered")
        return delivered / len(self.requests)


@dataclass
class StepReply:
    reward: float
    done: bool
    observation: Observation
    events: list[dict]


def parse_observation(doc: dict) -> Observation:
    if not isinstance(doc, dict):
        raise ProtocolError("observation is not an object")
    vehicles = []
    for v in _need(doc, "vehicles"):
        vehicles.append(
            VehicleView(
                capacity=int(_need(v, "cap")),
                space=int(_need(v, "spa")),
                station=int(_need(v, "to")),
                distance=int(_need(v, "dist")),
            )
        )
    requests = []
    for r in _need(doc, "requests"):
        state = str(_need(r, "state"))
        if state not in REQUEST_STATES:
            raise ProtocolError(f"unknown request state {state!r}")
        carrier = _need(r, "carrier")
        requests.append(
            RequestView(
                id=int(_need(r, "id")),
                origin=int(_need(r, "from")),
                destination=int(_need(r, "to")),
                value=float(_need(r, "val")),
                volume=int(_need(r, "vol")),
                appear=int(_need(r, "time")),
                state=state,
                carrier=None if carrier is None else int(carrier),
            )
        )

    ori = np.asarray(_need(doc, "ori"), dtype=np.int64)
    dest = np.asarray(_need(doc, "dest"), dtype=np.int64)
    if ori.shape != dest.shape or ori.ndim != 1:
        raise ProtocolError("ori/dest counts disagree")

    request_masks = {}
    for key, row in _need(doc, "request_masks").items():
        mask = np.asarray(row, dtype=bool)
        if mask.shape != (len(vehicles) + 1,):
            raise ProtocolError(f"request mask {key} has wrong width")
        request_masks[int(key)] = mask
    vehicle_masks = np.asarray(_need(doc, "vehicle_masks"), dtype=bool)
    vehicle_masks = vehicle_masks.reshape(len(vehicles), len(ori))

    return Observation(
        t=int(_need(doc, "t")),
        m_t=int(_need(doc, "m_t")),
        scenario=str(_need(doc, "scenario")),
        vehicles=vehicles,
        requests=requests,
        ori=ori,
        dest=dest,
        request_masks=request_masks,
        vehicle_masks=vehicle_masks,
    )


def parse_context(doc: dict) -> EpisodeContext:
    """Episode constants out of a reset observation."""
    distances = np.asarray(_need(doc, "distances"), dtype=np.int64)
    if distances.ndim != 2 or distances.shape[0] != distances.shape[1]:
        raise ProtocolError("distance matrix is not square")
    return EpisodeContext(
        scenario=str(_need(doc, "scenario")),
        distances=distances,
        cost_rate=float(_need(doc, "cost_rate")),
        horizon=int(_need(doc, "horizon")),
    )
