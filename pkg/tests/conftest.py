import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("ci", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.function_scoped_fixture])
settings.load_profile("ci")


@pytest.fixture(scope="session")
def torus8():
    from saltns.torus import TorusBasis

    return TorusBasis(2, 8, 32)


@pytest.fixture(scope="session")
def torus_ws(torus8):
    from saltns.operators import TorusWorkspace

    return TorusWorkspace(torus8)


@pytest.fixture(scope="session")
def disk66():
    from saltns.disk import DiskBasis

    return DiskBasis(6, 6)


@pytest.fixture
def out_root(tmp_path, monkeypatch):
    monkeypatch.setenv("SALTNS_OUTPUT_ROOT", str(tmp_path))
    return tmp_path


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: acceptance criteria (slow)")


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, ok, summary in sorted(mod.RESULTS):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {number:2d} {name}: {summary}")
