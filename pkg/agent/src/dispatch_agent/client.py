"""Client side of the environment wire protocol.

Two endpoint forms are understood:

    stdio       spawn the simulator as a child process and use its pipes
    tcp:PORT    connect to an already running server on localhost

Both carry one JSON object per line in each direction.  The client is
synchronous: every command waits for its answer, and a session drives at
most one episode at a time.
"""

from __future__ import annotations

import json
import shlex
import socket
import subprocess

from .obs import (
    EpisodeContext,
    Observation,
    ProtocolError,
    StepReply,
    parse_context,
    parse_observation,
)

DEFAULT_SERVER_COMMAND = "dpdpsim serve --transport stdio"


def parse_endpoint(text: str) -> tuple[str, int | None]:
    """Split an endpoint string into ("stdio", None) or ("tcp", port)."""
    if text == "stdio":
        return ("stdio", None)
    if text.startswith("tcp:"):
        try:
            port = int(text[4:])
        except ValueError:
            raise ValueError(f"bad tcp port in endpoint {text!r}") from None
        if not 0 < port < 65536:
            raise ValueError(f"tcp port out of range in endpoint {text!r}")
        return ("tcp", port)
    raise ValueError(f"unknown endpoint {text!r}; expected stdio or tcp:PORT")


class TcpTransport:
    """A line stream over a localhost TCP connection."""

    def __init__(self, port: int, host: str = "127.0.0.1", timeout: float = 60.0):
        self.sock = socket.create_connection((host, port), timeout=timeout)
        self.reader = self.sock.makefile("r", encoding="utf-8", newline="\n")
        self.writer = self.sock.makefile("w", encoding="utf-8", newline="\n")

    def send_line(self, text: str) -> None:
        self.writer.write(text + "\n")
        self.writer.flush()

    def recv_line(self) -> str:
        line = self.reader.readline()
        if not line:
            raise ProtocolError("server closed the connection")
        return line

    def close(self) -> None:
        for stream in (self.reader, self.writer):
            try:
                stream.close()
            except OSError:
                pass
        try:
            self.sock.close()
        except OSError:
            pass


class SubprocessTransport:
    """A line stream over a child process's stdin/stdout."""

    def __init__(self, command: str = DEFAULT_SERVER_COMMAND):
        self.proc = subprocess.Popen(
            shlex.split(command),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )

    def send_line(self, text: str) -> None:
        if self.proc.stdin is None or self.proc.poll() is not None:
            raise ProtocolError("server process is gone")
        self.proc.stdin.write(text + "\n")
        self.proc.stdin.flush()

    def recv_line(self) -> str:
        line = self.proc.stdout.readline() if self.proc.stdout else ""
        if not line:
            raise ProtocolError("server process closed its output")
        return line

    def close(self) -> None:
        if self.proc.poll() is None:
            try:
                if self.proc.stdin is not None:
                    self.proc.stdin.close()
                self.proc.wait(timeout=5.0)
            except (OSError, subprocess.TimeoutExpired):
                self.proc.kill()
                self.proc.wait()


def open_endpoint(text: str, server_command: str | None = None):
    kind, port = parse_endpoint(text)
    if kind == "stdio":
        return SubprocessTransport(server_command or DEFAULT_SERVER_COMMAND)
    return TcpTransport(port)


class EnvClient:
    """Drives episodes over a line transport.

    reset() hands back the episode constants together with the first
    observation; step() raises ProtocolError if the server rejects the
    action, since the policy is expected to send only feasible ones.
    """

    def __init__(self, transport):
        self.transport = transport
        self.context: EpisodeContext | None = None

    @classmethod
    def from_endpoint(cls, text: str, server_command: str | None = None) -> "EnvClient":
        return cls(open_endpoint(text, server_command))

    def __enter__(self) -> "EnvClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def request(self, msg: dict) -> dict:
        """One raw round trip; checks nothing beyond JSON framing."""
        self.transport.send_line(json.dumps(msg))
        line = self.transport.recv_line()
        try:
            doc = json.loads(line)
        except ValueError:
            raise ProtocolError(f"unreadable server answer: {line[:80]!r}") from None
        if not isinstance(doc, dict):
            raise ProtocolError("server answer is not an object")
        return doc

    def _checked(self, msg: dict) -> dict:
        doc = self.request(msg)
        if not doc.get("ok"):
            raise ProtocolError(doc.get("error", "server refused the command"))
        return doc

    def reset(self, scenario, seed: int) -> tuple[EpisodeContext, Observation]:
        doc = self._checked({"cmd": "reset", "scenario": scenario, "seed": int(seed)})
        raw = doc.get("observation")
        if raw is None:
            raise ProtocolError("reset answer carries no observation")
        self.context = parse_context(raw)
        return self.context, parse_observation(raw)

    def observe(self) -> Observation:
        doc = self._checked({"cmd": "observe"})
        return parse_observation(doc.get("observation"))

    def step(self, request_actions: dict, vehicle_actions: dict) -> StepReply:
        doc = self._checked(
            {
                "cmd": "step",
                "request_actions": {str(m): int(k) for m, k in request_actions.items()},
                "vehicle_actions": {str(k): int(i) for k, i in vehicle_actions.items()},
            }
        )
        return StepReply(
            reward=float(doc.get("reward", 0.0)),
            done=bool(doc.get("done", False)),
            observation=parse_observation(doc.get("observation")),
            events=list(doc.get("events", [])),
        )

    def close(self) -> None:
        try:
            self.transport.send_line(json.dumps({"cmd": "close"}))
            self.transport.recv_line()
        except ProtocolError:
            pass
        self.transport.close()
