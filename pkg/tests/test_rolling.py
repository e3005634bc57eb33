"""Rolling-horizon policy: caching, translation, and degradation handling."""

import numpy as np
import pytest

from dpdpsim.core import DEFER, Request, Scenario, StationGraph, VehicleSpec
from dpdpsim.sim import reset, run_episode, step
from dpdpsim.solvers import (
    DEFAULT_CONFIGS,
    RollingHorizonConfig,
    RollingHorizonPolicy,
    build_static_window,
    config_for,
    exact_solve,
)
from dpdpsim.solvers.rolling import _CachedSchedule
from dpdpsim.solvers.window import Plan


def tiny_scenario(horizon=5, cost_rate=0.3, distance=1):
    """All requests visible from the start; small enough for the exact solver."""
    return Scenario(
        graph=StationGraph(np.array([[0, distance], [distance, 0]])),
        fleet=[VehicleSpec(station=0, capacity=1)],
        requests=[
            Request(origin=0, destination=1, value=2.0, volume=1, appear=0),
            Request(origin=1, destination=0, value=1.5, volume=1, appear=0),
        ],
        horizon=horizon,
        cost_rate=cost_rate,
        name="tiny",
    )


def test_config_lookup():
    assert config_for("synth-S") == RollingHorizonConfig(20, 10)
    assert config_for("synth-S#17") == RollingHorizonConfig(20, 10)
    assert config_for("synth-L-cost") == RollingHorizonConfig(60, 30)
    assert config_for("synth-XL#3") == RollingHorizonConfig(40, 20)
    # Prefix families (one scenario per day) share their settings.
    assert config_for("dhrd-day12") == RollingHorizonConfig(30, 15)
    assert config_for("some-custom-thing") == RollingHorizonConfig()
    assert set(DEFAULT_CONFIGS) >= {"synth-S", "synth-L", "synth-XL", "dhrd"}


def test_config_and_solver_validation():
    with pytest.raises(ValueError, match="positive"):
        RollingHorizonConfig(horizon=0)
    with pytest.raises(ValueError, match="unknown window solver"):
        RollingHorizonPolicy(solver="tabu")


def test_replans_only_at_interval(monkeypatch):
    import dpdpsim.solvers.rolling as rolling

    calls = []
    real = rolling.sa_solve

    def counting(instance, params, rng):
        calls.append(instance.window_length)
        return real(instance, params, rng)

    monkeypatch.setattr(rolling, "sa_solve", counting)
    s = tiny_scenario(horizon=8)
    policy = RollingHorizonPolicy(
        solver="sa", config=RollingHorizonConfig(horizon=4, replan_interval=3), seed=0
    )
    run_episode(s, policy)
    # Slices 0..7 with a replan every 3rd slice: t = 0, 3, 6.
    assert len(calls) == 3
    # Windows never cross the episode end: 8-6 leaves only 2 slices.
    assert calls == [4, 4, 2]


def test_fresh_episode_triggers_replan(monkeypatch):
    import dpdpsim.solvers.rolling as rolling

    calls = []
    real = rolling.sa_solve

    def counting(instance, params, rng):
        calls.append(instance.window_length)
        return real(instance, params, rng)

    monkeypatch.setattr(rolling, "sa_solve", counting)
    policy = RollingHorizonPolicy(
        solver="sa", config=RollingHorizonConfig(horizon=10, replan_interval=10), seed=0
    )
    s = tiny_scenario(horizon=4)
    run_episode(s, policy)
    run_episode(s, policy)  # same scenario object, t wraps back to 0
    assert len(calls) == 2
    run_episode(tiny_scenario(horizon=6), policy)  # different scenario object
    assert len(calls) == 3


def test_exact_window_covering_episode_matches_static_optimum():
    # With every request visible at t=0 and one window spanning the whole
    # episode, rolling execution must realize exactly the static optimum.
    s = tiny_scenario()
    static = exact_solve(build_static_window(reset(s), s.horizon))
    policy = RollingHorizonPolicy(
        solver="exact",
        config=RollingHorizonConfig(horizon=s.horizon, replan_interval=s.horizon),
    )
    summary = run_episode(s, policy)
    assert static.objective == pytest.approx(2.0 + 1.5 - 0.3 * 2)
    assert summary.objective == pytest.approx(static.objective)
    assert policy.events == []


def test_unplanned_request_defers_until_next_replan():
    s = tiny_scenario(horizon=6, cost_rate=0.0)
    s.requests.append(Request(origin=0, destination=1, value=9.0, volume=1, appear=2))
    policy = RollingHorizonPolicy(
        solver="exact",
        config=RollingHorizonConfig(horizon=6, replan_interval=3),
    )
    state = reset(s)
    actions = []
    done = False
    while not done:
        action = policy(state, None)
        actions.append(action)
        result = step(state, action)
        state = result.next_state
        done = result.done
    # At t=2 the late request exists but the cached plan (frozen at t=0)
    # cannot know it, so it is deferred without being counted as a drop.
    assert actions[2].request_actions[2] == DEFER
    assert policy.events == []
    # The t=3 replan sees it; value 9 is too big to leave on the table.
    assert state.states[2].name == "DELIVERED"


def inject_cache(policy, state, pickups, stops):
    """Plant a hand-built schedule as if it had been produced at t=0."""
    policy.act(state)  # populate scenario identity and a real cache
    policy._cached = _CachedSchedule(
        anchor=0, plan=Plan(routes=[]), pickups=pickups, stops=stops
    )


def test_leave_late_dispatch():
    s = tiny_scenario(cost_rate=0.0)
    policy = RollingHorizonPolicy(
        solver="exact", config=RollingHorizonConfig(horizon=5, replan_interval=5)
    )
    state = reset(s)
    # Single planned stop: be at station 1 at slice 2.  One slice of travel
    # means departure belongs at slice 1, not slice 0.
    inject_cache(policy, state, pickups={}, stops=[[(2, 1)]])
    first = policy.act(state)
    assert first.vehicle_actions[0] == 0
    later = state.copy()
    later.t = 1
    assert policy.act(later).vehicle_actions[0] == 1
    assert policy.events == []


def test_late_vehicle_is_logged_and_redirected():
    s = tiny_scenario(cost_rate=0.0, distance=2)
    policy = RollingHorizonPolicy(
        solver="exact", config=RollingHorizonConfig(horizon=5, replan_interval=5)
    )
    state = reset(s)
    # Be at station 1 at slice 3 over a two-slice leg: departure belonged at
    # slice 1.  Consulted at slice 2 the vehicle can only leave now, late.
    inject_cache(policy, state, pickups={}, stops=[[(3, 1)]])
    behind = state.copy()
    behind.t = 2
    action = policy.act(behind)
    assert action.vehicle_actions[0] == 1
    assert any("late" in e for e in policy.events)


def test_impossible_pickup_is_logged_and_deferred():
    s = tiny_scenario(cost_rate=0.0)
    policy = RollingHorizonPolicy(
        solver="exact", config=RollingHorizonConfig(horizon=5, replan_interval=5)
    )
    state = reset(s)
    # The schedule claims vehicle 0 lifts request 1 now, but that request
    # originates across the network from where the vehicle stands.
    inject_cache(policy, state, pickups={1: (0, 0)}, stops=[[]])
    action = policy.act(state)
    assert action.request_actions[1] == DEFER
    assert any("dropped pickup" in e for e in policy.events)


@pytest.mark.parametrize("solver", ["sa", "ga", "exact"])
def test_all_solvers_drive_full_episodes(solver):
    s = tiny_scenario(horizon=6)
    policy = RollingHorizonPolicy(
        solver=solver, config=RollingHorizonConfig(horizon=4, replan_interval=2), seed=1
    )
    summary = run_episode(s, policy)
    assert summary.steps == 6
    assert summary.objective >= 0.0
