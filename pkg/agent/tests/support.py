"""Scenario and model builders shared across the agent test modules."""

from dispatch_agent import ModelConfig
from dpdpsim.generate import SyntheticSpec

FUZZ_PRESETS = {
    "fuzz-a": SyntheticSpec(stations=5, requests=8, vehicles=3, horizon=10, max_distance=4),
    "fuzz-b": SyntheticSpec(stations=4, requests=6, vehicles=2, horizon=8, max_distance=3),
    "fuzz-c": SyntheticSpec(
        stations=6, requests=10, vehicles=3, horizon=12, max_distance=5, cost_rate=0.2
    ),
}


def ring_distances(n: int, scale: int = 1) -> list[int]:
    """Flat row-major ring metric; triangle-closed by construction."""
    return [scale * min(abs(i - j), n - abs(i - j)) for i in range(n) for j in range(n)]


def tiny_scenario(horizon=8, cost_rate=0.0):
    """Three stations, two vehicles, four requests; decodes in a blink."""
    return {
        "format": "dpdp-scenario",
        "version": 1,
        "name": "tiny",
        "stations": {"count": 3, "distance": [0, 2, 3, 2, 0, 4, 3, 4, 0]},
        "fleet": [{"station": 0, "capacity": 3}, {"station": 2, "capacity": 2}],
        "requests": [
            {"from": 0, "to": 2, "val": 5.0, "vol": 1, "time": 1},
            {"from": 0, "to": 1, "val": 4.0, "vol": 2, "time": 1},
            {"from": 1, "to": 0, "val": 3.0, "vol": 1, "time": 2},
            {"from": 2, "to": 0, "val": 6.0, "vol": 1, "time": 3},
        ],
        "horizon": horizon,
        "cost_rate": cost_rate,
        "profit_mode": "distance",
    }


def single_track_scenario(horizon=3):
    """One station, one vehicle, no requests: every decision is forced."""
    return {
        "format": "dpdp-scenario",
        "version": 1,
        "name": "single-track",
        "stations": {"count": 1, "distance": [0]},
        "fleet": [{"station": 0, "capacity": 1}],
        "requests": [],
        "horizon": horizon,
        "cost_rate": 0.0,
        "profit_mode": "distance",
    }


def small_model(**overrides) -> ModelConfig:
    """A policy sized for tests, not for learning quality."""
    base = dict(hidden_size=32, heads=2, encoder_layers=2, decoder_layers=1, max_positions=128)
    base.update(overrides)
    return ModelConfig(**base)
