"""Scenario construction: synthetic presets, scenario files, request-log import."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import Request, Scenario, StationGraph, VehicleSpec, shortest_path_closure, validate_scenario

SCENARIO_FORMAT = "dpdp-scenario"
SCENARIO_VERSION = 1


@dataclass
class SyntheticSpec:
    """Knobs for the random generator.

    Distances are drawn uniformly from {1..max_distance} per station pair,
    symmetrized, then replaced by their shortest-path closure.  Zero-length
    edges are excluded: they would let the closure collapse most of the
    network onto a single point, and distinct stations are meant to be apart.
    Each request's value equals the closed travel distance between its
    endpoints.
    """

    stations: int
    requests: int
    vehicles: int
    horizon: int
    max_distance: int
    capacity: int = 3
    cost_rate: float = 0.0
    name: str = "synthetic"


PRESETS: dict[str, SyntheticSpec] = {
    "synth-S": SyntheticSpec(
        stations=20, requests=110, vehicles=5, horizon=58, max_distance=10, name="synth-S"
    ),
    "synth-S-cost": SyntheticSpec(
        stations=20, requests=110, vehicles=5, horizon=58, max_distance=10,
        cost_rate=0.3, name="synth-S-cost",
    ),
    "synth-L": SyntheticSpec(
        stations=50, requests=550, vehicles=15, horizon=128, max_distance=30, name="synth-L"
    ),
    "synth-L-cost": SyntheticSpec(
        stations=50, requests=550, vehicles=15, horizon=128, max_distance=30,
        cost_rate=0.3, name="synth-L-cost",
    ),
    "synth-XL": SyntheticSpec(
        stations=300, requests=550, vehicles=50, horizon=128, max_distance=20, name="synth-XL"
    ),
}


def resolve_spec(preset: str | SyntheticSpec) -> SyntheticSpec:
    if isinstance(preset, SyntheticSpec):
        return preset
    try:
        return PRESETS[preset]
    except KeyError:
        raise ValueError(
            f"unknown preset {preset!r}; available: {', '.join(sorted(PRESETS))}"
        ) from None


def generate_synthetic(preset: str | SyntheticSpec, seed: int) -> Scenario:
    """Deterministically build a scenario from a preset name or explicit spec.

    The draw order is fixed (distances, fleet, then per-request fields), so a
    given (spec, seed) pair always yields the same scenario.
    """
    spec = resolve_spec(preset)
    rng = np.random.default_rng(seed)

    n = spec.stations
    raw = np.zeros((n, n), dtype=np.int64)
    for i in range(n):
        for j in range(i + 1, n):
            d = int(rng.integers(1, spec.max_distance + 1))
            raw[i, j] = d
            raw[j, i] = d
    distance = shortest_path_closure(raw)

    fleet = [
        VehicleSpec(station=int(rng.integers(n)), capacity=spec.capacity)
        for _ in range(spec.vehicles)
    ]

    requests = []
    for _ in range(spec.requests):
        origin = int(rng.integers(n))
        destination = int(rng.integers(n))
        while destination == origin:
            destination = int(rng.integers(n))
        appear = int(rng.integers(1, spec.horizon + 1))
        requests.append(
            Request(
                origin=origin,
                destination=destination,
                value=float(distance[origin, destination]),
                volume=1,
                appear=appear,
            )
        )

    scenario = Scenario(
        graph=StationGraph(distance),
        fleet=fleet,
        requests=requests,
        horizon=spec.horizon,
        cost_rate=spec.cost_rate,
        profit_mode="distance",
        name=f"{spec.name}#{seed}",
    )
    validate_scenario(scenario)
    return scenario


def scenario_to_dict(s: Scenario) -> dict:
    return {
        "format": SCENARIO_FORMAT,
        "version": SCENARIO_VERSION,
        "name": s.name,
        "stations": {
            "count": s.station_count,
            "distance": [int(x) for x in s.graph.distance.reshape(-1)],
        },
        "fleet": [{"station": v.station, "capacity": v.capacity} for v in s.fleet],
        "requests": [
            {
                "from": r.origin,
                "to": r.destination,
                "val": r.value,
                "vol": r.volume,
                "time": r.appear,
            }
            for r in s.requests
        ],
        "horizon": s.horizon,
        "cost_rate": s.cost_rate,
        "profit_mode": s.profit_mode,
    }


def scenario_from_dict(doc: dict) -> Scenario:
    if not isinstance(doc, dict):
        raise ValueError("scenario document must be an object")
    if doc.get("format") != SCENARIO_FORMAT:
        raise ValueError(f"not a scenario file (format={doc.get('format')!r})")
    if doc.get("version") != SCENARIO_VERSION:
        raise ValueError(f"unsupported scenario version {doc.get('version')!r}")
    try:
        count = int(doc["stations"]["count"])
        flat = doc["stations"]["distance"]
        if len(flat) != count * count:
            raise ValueError(
                f"distance matrix has {len(flat)} entries, expected {count * count}"
            )
        distance = np.asarray(flat, dtype=np.int64).reshape(count, count)
        fleet = [
            VehicleSpec(station=int(v["station"]), capacity=int(v["capacity"]))
            for v in doc["fleet"]
        ]
        requests = [
            Request(
                origin=int(r["from"]),
                destination=int(r["to"]),
                value=float(r["val"]),
                volume=int(r["vol"]),
                appear=int(r["time"]),
            )
            for r in doc["requests"]
        ]
        scenario = Scenario(
            graph=StationGraph(distance),
            fleet=fleet,
            requests=requests,
            horizon=int(doc["horizon"]),
            cost_rate=float(doc["cost_rate"]),
            profit_mode=str(doc.get("profit_mode", "distance")),
            name=str(doc.get("name", "custom")),
        )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed scenario document: {exc}") from exc
    validate_scenario(scenario)
    return scenario


def save_scenario(s: Scenario, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(s), indent=1) + "\n")


def load_scenario(path: str | Path) -> Scenario:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"scenario file is not valid JSON: {exc}") from exc
    return scenario_from_dict(doc)


def load_distance_file(path: str | Path) -> np.ndarray:
    """Read a square station-distance matrix from CSV and close it."""
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row:
                continue
            rows.append([int(float(x)) for x in row])
    m = np.asarray(rows, dtype=np.int64)
    return shortest_path_closure(m)


def import_request_log(
    log_path: str | Path,
    distance_path: str | Path,
    cell_count: int,
    horizon: int,
    vehicles: list[tuple[int, int]],
    profit: float = 1.0,
    name: str = "imported",
) -> dict[int, Scenario]:
    """Build one scenario per day from a trip log.

    The log is a CSV with header ``day,slot,origin_cell,dest_cell``; slots are
    zero-based within a day, so a trip in slot s becomes a request appearing at
    slice s + 1.  Every request has unit volume and a fixed profit.  The
    station distance file is closed on load.  ``vehicles`` lists
    (initial_station, capacity) pairs shared by all days.
    """
    distance = load_distance_file(distance_path)
    if distance.shape[0] != cell_count:
        raise ValueError(
            f"distance file covers {distance.shape[0]} cells, expected {cell_count}"
        )
    graph = StationGraph(distance)
    fleet = [VehicleSpec(station=s, capacity=c) for s, c in vehicles]

    per_day: dict[int, list[Request]] = {}
    with open(log_path, newline="") as fh:
        reader = csv.DictReader(fh)
        needed = {"day", "slot", "origin_cell", "dest_cell"}
        if reader.fieldnames is None or not needed.issubset(reader.fieldnames):
            raise ValueError(f"trip log must have columns {sorted(needed)}")
        for i, row in enumerate(reader):
            day = int(row["day"])
            slot = int(row["slot"])
            origin = int(row["origin_cell"])
            dest = int(row["dest_cell"])
            if not 0 <= slot < horizon:
                raise ValueError(f"row {i}: slot {slot} outside [0, {horizon})")
            if not 0 <= origin < cell_count or not 0 <= dest < cell_count:
                raise ValueError(f"row {i}: cell outside [0, {cell_count})")
            per_day.setdefault(day, []).append(
                Request(origin=origin, destination=dest, value=float(profit), volume=1, appear=slot + 1)
            )

    scenarios: dict[int, Scenario] = {}
    for day in sorted(per_day):
        scenario = Scenario(
            graph=graph,
            fleet=list(fleet),
            requests=per_day[day],
            horizon=horizon,
            cost_rate=0.0,
            profit_mode="fixed",
            name=f"{name}-day{day}",
        )
        validate_scenario(scenario)
        scenarios[day] = scenario
    return scenarios
