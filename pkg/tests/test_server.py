"""Line protocol: session lifecycle, observation content, transports."""

import io
import json
import socket
import threading

import numpy as np
import pytest

from dpdpsim.core import DEFER
from dpdpsim.generate import SyntheticSpec, scenario_to_dict
from dpdpsim.server import Session, make_tcp_server, observation, process_line, serve_stdio
from dpdpsim.sim import reset, step
from dpdpsim.solvers import nearest_act


@pytest.fixture
def session(two_station_scenario):
    return Session(
        registry={
            "pair": two_station_scenario(appear=0),
            "spec": SyntheticSpec(
                stations=3, requests=4, vehicles=1, horizon=6, max_distance=2, name="spec"
            ),
        }
    )


def test_episode_lifecycle(session):
    assert session.t == -1
    response, keep = session.handle({"cmd": "reset", "scenario": "pair", "seed": 0})
    assert keep and response["ok"] and response["t"] == 0
    obs = response["observation"]
    # Static facts ride only on the reset observation.
    assert obs["distances"] == [[0, 1], [1, 0]]
    assert obs["cost_rate"] == 0.0
    assert obs["horizon"] == 4

    response, _ = session.handle({"cmd": "observe"})
    assert response["ok"] and "distances" not in response["observation"]

    total = 0.0
    done = False
    while not done:
        # Slice 0 loads the request and launches the vehicle; afterwards the
        # vehicle stands at station 1 and just stays there.
        response, _ = session.handle(
            {"cmd": "step", "request_actions": {"0": 0} if session.t == 0 else {},
             "vehicle_actions": {"0": 1}}
        )
        assert response["ok"]
        total += response["reward"]
        done = response["done"]
    assert session.t == 4
    assert total == 5.0

    response, keep = session.handle({"cmd": "close"})
    assert response == {"ok": True, "t": 4}
    assert keep is False


def test_commands_before_reset(session):
    for cmd in ("observe", "step"):
        response, keep = session.handle({"cmd": cmd})
        assert keep
        assert not response["ok"]
        assert response["t"] == -1
        assert "reset first" in response["error"]


def test_unknown_command_and_scenario(session):
    response, _ = session.handle({"cmd": "dance"})
    assert not response["ok"] and "unknown command" in response["error"]
    response, _ = session.handle({"cmd": "reset", "scenario": "mystery"})
    assert not response["ok"] and "bad scenario" in response["error"]
    response, _ = session.handle({"cmd": "reset", "scenario": 7})
    assert not response["ok"]


def test_registered_spec_regenerates_per_seed(session):
    a, _ = session.handle({"cmd": "reset", "scenario": "spec", "seed": 1})
    b, _ = session.handle({"cmd": "reset", "scenario": "spec", "seed": 2})
    assert a["observation"]["scenario"] == "spec#1"
    assert b["observation"]["scenario"] == "spec#2"
    assert a["observation"]["distances"] != b["observation"]["distances"]


def test_inline_scenario(two_station_scenario):
    session = Session(registry={})
    doc = scenario_to_dict(two_station_scenario(appear=0))
    response, _ = session.handle({"cmd": "reset", "scenario": doc})
    assert response["ok"]
    assert response["observation"]["scenario"] == "two-station"
    bad = dict(doc, horizon=0)
    response, _ = session.handle({"cmd": "reset", "scenario": bad})
    assert not response["ok"] and "bad scenario" in response["error"]


def test_infeasible_step_leaves_state_untouched(session):
    session.handle({"cmd": "reset", "scenario": "pair"})
    bad, _ = session.handle({"cmd": "step", "request_actions": {}, "vehicle_actions": {}})
    assert not bad["ok"] and bad["t"] == 0
    assert "missing" in bad["error"]
    malformed, _ = session.handle(
        {"cmd": "step", "request_actions": {"0": "north"}, "vehicle_actions": {}}
    )
    assert not malformed["ok"] and "malformed action" in malformed["error"]
    # The episode is still at slice 0 and a correct retry goes through.
    good, _ = session.handle(
        {"cmd": "step", "request_actions": {"0": -1}, "vehicle_actions": {"0": 0}}
    )
    assert good["ok"] and good["t"] == 1


def test_step_events_are_compact(session):
    session.handle({"cmd": "reset", "scenario": "pair"})
    response, _ = session.handle(
        {"cmd": "step", "request_actions": {"0": 0}, "vehicle_actions": {"0": 1}}
    )
    kinds = [e["kind"] for e in response["events"]]
    assert kinds == ["pickup", "dispatch"]
    pickup = response["events"][0]
    assert pickup == {"kind": "pickup", "time": 0, "request": 0, "vehicle": 0, "station": 0}


def test_observation_hides_future_requests(two_station_scenario):
    s = two_station_scenario()  # request appears at slice 1
    state = reset(s)
    obs = observation(state)
    assert obs["m_t"] == 0
    assert obs["requests"] == []
    assert obs["request_masks"] == {}
    assert obs["ori"] == [0, 0]
    assert obs["dest"] == [0, 0]


def test_observation_counts_origins_and_destinations():
    spec = SyntheticSpec(stations=4, requests=10, vehicles=2, horizon=8, max_distance=3)
    from dpdpsim.generate import generate_synthetic

    state = reset(generate_synthetic(spec, 0))
    for _ in range(4):
        state = step(state, nearest_act(state)).next_state
    obs = observation(state)
    reqs = state.scenario.requests
    expect_ori = [0] * 4
    expect_dest = [0] * 4
    for m, r in enumerate(reqs):
        if r.appear > state.t:
            continue
        label = state.states[m].name
        if label == "UNASSIGNED":
            expect_ori[r.origin] += 1
            expect_dest[r.destination] += 1
        elif label == "PICKED":
            expect_dest[r.destination] += 1
    assert obs["ori"] == expect_ori
    assert obs["dest"] == expect_dest
    assert obs["m_t"] == sum(1 for r in reqs if r.appear <= state.t)
    for v, vehicle in zip(obs["vehicles"], state.vehicles):
        assert v == {
            "cap": vehicle.capacity,
            "spa": vehicle.space,
            "to": vehicle.station,
            "dist": vehicle.remaining,
        }


def test_session_matches_in_process_sim(session, two_station_scenario):
    # Differential run: the protocol session and a local simulator must agree
    # on every reward and the final objective.
    session.handle({"cmd": "reset", "scenario": "pair", "seed": 0})
    state = reset(two_station_scenario(appear=0), seed=0)
    done = False
    while not done:
        action = nearest_act(state)
        response, _ = session.handle(
            {
                "cmd": "step",
                "request_actions": {str(m): k for m, k in action.request_actions.items()},
                "vehicle_actions": {str(k): i for k, i in action.vehicle_actions.items()},
            }
        )
        result = step(state, action)
        assert response["ok"]
        assert response["reward"] == result.reward
        assert response["done"] == result.done
        state = result.next_state
        done = result.done
    assert session.state.objective == state.objective


def test_parse_errors(session):
    text, keep = process_line(session, "this is not json\n")
    assert keep
    assert json.loads(text) == {"ok": False, "t": -1, "error": "parse"}
    text, _ = process_line(session, '["a", "list"]')
    assert json.loads(text)["error"] == "parse"
    session.handle({"cmd": "reset", "scenario": "pair"})
    text, _ = process_line(session, "{broken")
    assert json.loads(text)["t"] == 0


def transcript_lines(seed=0):
    return [
        json.dumps({"cmd": "reset", "scenario": "pair", "seed": seed}),
        json.dumps({"cmd": "observe"}),
        json.dumps({"cmd": "step", "request_actions": {"0": 0}, "vehicle_actions": {"0": 1}}),
        json.dumps({"cmd": "step", "request_actions": {}, "vehicle_actions": {"0": 1}}),
        json.dumps({"cmd": "close"}),
    ]


def test_transcript_replays_identically(two_station_scenario):
    registry = {"pair": two_station_scenario(appear=0)}
    outputs = []
    for _ in range(2):
        session = Session(registry)
        outputs.append([process_line(session, line)[0] for line in transcript_lines()])
    assert outputs[0] == outputs[1]


def test_serve_stdio_stops_after_close(two_station_scenario):
    registry = {"pair": two_station_scenario(appear=0)}
    lines = transcript_lines() + [json.dumps({"cmd": "observe"})]
    stdin = io.StringIO("\n".join(lines) + "\n\n")
    stdout = io.StringIO()
    serve_stdio(registry, stdin, stdout)
    answers = stdout.getvalue().splitlines()
    # close ends the session; the trailing observe is never answered.
    assert len(answers) == 5
    assert json.loads(answers[-1]) == {"ok": True, "t": 2}
    assert all(json.loads(a)["ok"] for a in answers)


def ask(sock_file, sock, msg):
    sock.sendall((json.dumps(msg) + "\n").encode())
    return json.loads(sock_file.readline())


def test_tcp_sessions_are_isolated(two_station_scenario):
    registry = {"pair": two_station_scenario(appear=0)}
    server = make_tcp_server(0, registry)
    port = server.server_address[1]
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        with socket.create_connection(("127.0.0.1", port)) as a, socket.create_connection(
            ("127.0.0.1", port)
        ) as b:
            fa = a.makefile("r")
            fb = b.makefile("r")
            assert ask(fa, a, {"cmd": "reset", "scenario": "pair"})["t"] == 0
            assert ask(fb, b, {"cmd": "reset", "scenario": "pair"})["t"] == 0
            # Interleave: advance only session a, then check b still sits at 0.
            r = ask(fa, a, {"cmd": "step", "request_actions": {"0": -1}, "vehicle_actions": {"0": 0}})
            assert r["ok"] and r["t"] == 1
            assert ask(fb, b, {"cmd": "observe"})["t"] == 0
            assert ask(fa, a, {"cmd": "observe"})["t"] == 1
            assert ask(fa, a, {"cmd": "close"}) == {"ok": True, "t": 1}
            assert ask(fb, b, {"cmd": "close"}) == {"ok": True, "t": 0}
    finally:
        server.shutdown()
        server.server_close()
