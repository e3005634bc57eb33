"""Shared builders for the test suite."""

import numpy as np
import pytest

from dpdpsim.core import Request, Scenario, StationGraph, VehicleSpec


def two_station_scenario(value=5.0, distance=1, cost_rate=0.0, horizon=4, capacity=1, appear=1) -> Scenario:
    """One vehicle at station 0, one request 0 -> 1."""
    graph = StationGraph([[0, distance], [distance, 0]])
    return Scenario(
        graph=graph,
        fleet=[VehicleSpec(capacity=capacity, station=0)],
        requests=[Request(origin=0, destination=1, value=value, volume=1, appear=appear)],
        horizon=horizon,
        cost_rate=cost_rate,
        name="two-station",
    )


@pytest.fixture(name="two_station_scenario")
def two_station_scenario_fixture():
    """Expose the scenario builder to tests as a fixture-provided factory."""
    return two_station_scenario


@pytest.fixture
def rng():
    return np.random.default_rng(0)
