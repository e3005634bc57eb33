"""Shared fixtures: an in-thread environment server for the agent suite.

Tests talk to the environment exactly like production code does, over
the line protocol; the server just happens to live in a daemon thread
of the test process.  The agent package itself never touches the
environment package.
"""

import threading

import numpy as np
import pytest

from dispatch_agent import EnvClient, open_endpoint
from dpdpsim.generate import PRESETS
from dpdpsim.server import make_tcp_server

from support import FUZZ_PRESETS


@pytest.fixture(scope="session")
def env_port():
    registry = dict(PRESETS)
    registry.update(FUZZ_PRESETS)
    server = make_tcp_server(0, registry=registry)
    port = server.server_address[1]
    threading.Thread(target=server.serve_forever, daemon=True).start()
    yield port
    server.shutdown()
    server.server_close()


@pytest.fixture
def client(env_port):
    c = EnvClient(open_endpoint(f"tcp:{env_port}"))
    yield c
    c.close()


@pytest.fixture
def rng():
    return np.random.default_rng(0)
