import os
import socket

import pytest

from cpharness.sandbox import Sandbox


@pytest.fixture(autouse=True)
def no_network(monkeypatch):
    """Tests never reach the network; the remote client is additionally disabled."""
    monkeypatch.setenv("CPHARNESS_OFFLINE", "1")

    def guard(*args, **kwargs):
        raise RuntimeError("network access attempted during tests")

    monkeypatch.setattr(socket.socket, "connect", guard)
    monkeypatch.setattr(socket, "create_connection", guard)


@pytest.fixture(scope="session")
def cache_root(tmp_path_factory):
    return tmp_path_factory.mktemp("cache")


@pytest.fixture(scope="session")
def sandbox(cache_root):
    # shared compile/run cache keeps the suite fast; tests needing a cold cache make their own
    return Sandbox(cache_root / "shared", workers=min(4, os.cpu_count() or 1))


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
