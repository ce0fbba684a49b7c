import functools

import pytest

from dronevox.config import RunConfig
from dronevox.pipeline import fly_config, record_audio
from dronevox.trajectory import GestureKind


@functools.lru_cache(maxsize=None)
def default_flight(kind: GestureKind, seed: int):
    """Default-config flight, shared across the session (flights are deterministic)."""
    cfg = RunConfig().with_run(gesture=kind.value, seed=seed)
    return fly_config(cfg)


@functools.lru_cache(maxsize=None)
def default_recording(kind: GestureKind, seed: int):
    cfg = RunConfig().with_run(gesture=kind.value, seed=seed)
    rec = default_flight(kind, seed)
    audio, onset = record_audio(rec, cfg)
    return rec, audio, onset


@pytest.fixture(scope="session")
def flights():
    return default_flight


@pytest.fixture(scope="session")
def recordings():
    return default_recording


_ACCEPTANCE = {}
_NOTES = {}


@pytest.fixture
def note(request):
    """Record a measured value for the acceptance summary."""
    def add(text):
        _NOTES.setdefault(request.node.name, []).append(text)
    return add


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    name = report.nodeid.split("::")[-1]
    if "test_acceptance" in report.nodeid and name.startswith("test_criterion_"):
        _ACCEPTANCE[name] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE):
        num = name.split("_")[2]
        label = " ".join(name.split("_")[3:])
        verdict = "PASS" if _ACCEPTANCE[name] == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {int(num):>2} {verdict}  {label}")
        for text in _NOTES.get(name, []):
            terminalreporter.write_line(f"             {text}")
