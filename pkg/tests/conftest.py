import time

import pytest

from peghole.harness import EpisodeConfig, sweep
from peghole.sim import SimConfig

# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE = {}


def record(number: int, ok: bool, detail: str) -> str:
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[number] = line
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])


def _timed_sweep(method, base=None):
    t0 = time.perf_counter()
    result = sweep(method, base or EpisodeConfig())
    return result, time.perf_counter() - t0


@pytest.fixture(scope="session")
def active_sweep():
    return _timed_sweep("active")


@pytest.fixture(scope="session")
def noisy_active_sweep():
    return _timed_sweep("active", EpisodeConfig(sim=SimConfig(noise=1e-5)))


@pytest.fixture(scope="session")
def spiral_sweep():
    return _timed_sweep("spiral")
