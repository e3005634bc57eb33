"""Line-delimited JSON protocol for driving episodes from another process.

One session runs one episode at a time.  Commands:

    {"cmd": "reset", "scenario": name-or-inline-dict, "seed": int}
    {"cmd": "observe"}
    {"cmd": "step", "request_actions": {"m": k-or--1}, "vehicle_actions": {"k": i}}
    {"cmd": "close"}

Every response carries an ok flag and the current slice t (-1 before the
first reset).  Infeasible steps answer ok=false with the validation message
and leave the episode untouched, so a client can retry.  The full distance
matrix rides along on the reset observation only; later observations refer
to the scenario by name.

Responses are pure functions of the message history, which makes recorded
transcripts replayable byte for byte.
"""

from __future__ import annotations

import json
import socketserver
import sys
from dataclasses import asdict

from . import generate, sim
from .core import DEFER, JointAction, RequestState, Scenario, WorldState
from .generate import SyntheticSpec

def observation(state: WorldState, include_distances: bool = False) -> dict:
    """Everything a client may see: no field leaks future requests."""
    scenario = state.scenario
    t = state.t
    vehicles = [
        {"cap": v.capacity, "spa": v.space, "to": v.station, "dist": v.remaining}
        for v in state.vehicles
    ]
    requests = []
    ori = [0] * scenario.station_count
    dest = [0] * scenario.station_count
    for m, req in enumerate(scenario.requests):
        if req.appear > t:
            continue
        st = state.states[m]
        requests.append(
            {
                "id": m,
                "from": req.origin,
                "to": req.destination,
                "val": req.value,
                "vol": req.volume,
                "time": req.appear,
                "state": st.label(),
                "carrier": state.carriers[m],
            }
        )
        if st == RequestState.UNASSIGNED:
            ori[req.origin] += 1
            dest[req.destination] += 1
        elif st == RequestState.PICKED:
            dest[req.destination] += 1

    masks = sim.action_masks(state)
    obs = {
        "t": t,
        "m_t": len(requests),
        "scenario": scenario.name,
        "vehicles": vehicles,
        "requests": requests,
        "ori": ori,
        "dest": dest,
        "request_masks": {
            str(m): row.tolist() for m, row in masks.request_masks.items()
        },
        "vehicle_masks": masks.vehicle_masks.tolist(),
    }
    if include_distances:
        obs["distances"] = scenario.graph.distance.tolist()
        obs["cost_rate"] = scenario.cost_rate
        obs["horizon"] = scenario.horizon
    return obs


class Session:
    """One strictly ordered message stream driving at most one episode."""

    def __init__(self, registry: dict | None = None):
        if registry is None:
            registry = dict(generate.PRESETS)
        self.registry = registry
        self.state: WorldState | None = None

    @property
    def t(self) -> int:
        return self.state.t if self.state is not None else -1

    def handle(self, msg: dict) -> tuple[dict, bool]:
        """Returns (response, keep_going)."""
        cmd = msg.get("cmd")
        if cmd == "reset":
            return self._reset(msg), True
        if cmd == "observe":
            if self.state is None:
                return self._error("no episode; reset first"), True
            return {"ok": True, "t": self.t, "observation": observation(self.state)}, True
        if cmd == "step":
            return self._step(msg), True
        if cmd == "close":
            return {"ok": True, "t": self.t}, False
        return self._error(f"unknown command {cmd!r}"), True

    def _error(self, message: str) -> dict:
        return {"ok": False, "t": self.t, "error": message}

    def _reset(self, msg: dict) -> dict:
        ref = msg.get("scenario")
        seed = int(msg.get("seed", 0))
        try:
            scenario = self._resolve(ref, seed)
        except (KeyError, ValueError, TypeError) as exc:
            return self._error(f"bad scenario: {exc}")
        self.state = sim.reset(scenario, seed)
        return {
            "ok": True,
            "t": 0,
            "observation": observation(self.state, include_distances=True),
        }

    def _resolve(self, ref, seed: int) -> Scenario:
        if isinstance(ref, str):
            if ref not in self.registry:
                raise KeyError(f"unknown scenario {ref!r}")
            entry = self.registry[ref]
            if isinstance(entry, Scenario):
                return entry
            if isinstance(entry, SyntheticSpec):
                return generate.generate_synthetic(entry, seed=seed)
            raise TypeError(f"registry entry {ref!r} is not usable")
        if isinstance(ref, dict):
            return generate.scenario_from_dict(ref)
        raise TypeError("scenario must be a registered name or an inline object")

    def _step(self, msg: dict) -> dict:
        if self.state is None:
            return self._error("no episode; reset first")
        try:
            action = JointAction(
                request_actions={
                    int(m): int(k) for m, k in msg.get("request_actions", {}).items()
                },
                vehicle_actions={
                    int(k): int(i) for k, i in msg.get("vehicle_actions", {}).items()
                },
            )
        except (TypeError, ValueError):
            return self._error("malformed action")
        try:
            result = sim.step(self.state, action)
        except ValueError as exc:
            return self._error(str(exc))
        self.state = result.next_state
        events = []
        for ev in result.events:
            doc = {key: val for key, val in asdict(ev).items() if val is not None}
            events.append(doc)
        return {
            "ok": True,
            "t": self.t,
            "reward": result.reward,
            "done": result.done,
            "observation": observation(self.state),
            "events": events,
        }


def process_line(session: Session, line: str) -> tuple[str, bool]:
    """Parse one line, dispatch it, serialize the response."""
    try:
        msg = json.loads(line)
        if not isinstance(msg, dict):
            raise ValueError("not an object")
    except ValueError:
        return json.dumps({"ok": False, "t": session.t, "error": "parse"}), True
    response, keep_going = session.handle(msg)
    return json.dumps(response), keep_going


def serve_stdio(registry: dict | None = None, stdin=None, stdout=None):
    """Serve one session over standard input and output."""
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    session = Session(registry)
    for line in stdin:
        if not line.strip():
            continue
        text, keep_going = process_line(session, line)
        stdout.write(text + "\n")
        stdout.flush()
        if not keep_going:
            break


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        session = Session(self.server.registry)  # type: ignore[attr-defined]
        for raw in self.rfile:
            line = raw.decode("utf-8", errors="replace")
            if not line.strip():
                continue
            text, keep_going = process_line(session, line)
            self.wfile.write((text + "\n").encode("utf-8"))
            self.wfile.flush()
            if not keep_going:
                break


class _Server(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


def make_tcp_server(port: int, registry: dict | None = None) -> _Server:
    """A TCP server hosting an isolated session per connection.

    Port 0 asks the OS for a free port; read it back from server_address.
    """
    server = _Server(("127.0.0.1", port), _Handler)
    server.registry = registry  # type: ignore[attr-defined]
    return server
