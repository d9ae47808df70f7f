import gc
import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from extbdd import manager  # noqa: E402

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.function_scoped_fixture, HealthCheck.too_slow])
settings.load_profile("default")


def shutdown():
    """Deinit the current manager, releasing handles a failed test left behind."""
    if not manager.is_initialised():
        return
    gc.collect()
    m = manager.current()
    if m.live_handle_count():
        for ref in list(m._handles.values()):
            h = ref()
            if h is not None:
                h.release()
    manager.deinit()


@pytest.fixture
def mgr(tmp_path):
    """A fresh manager over a private temp directory."""
    shutdown()
    m = manager.init(memory_bytes=128 << 20, temp_dir=str(tmp_path / "tmp"))
    yield m
    shutdown()


@pytest.fixture
def store(mgr):
    return mgr.store


def pytest_terminal_summary(terminalreporter):
    from helpers import VERDICTS
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
