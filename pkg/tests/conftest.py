import numpy as np
import pytest

from vbsqueeze.fock import FockConfig

@pytest.fixture
def single16():
    return FockConfig(16, 1, 1.0, 8)

@pytest.fixture
def two16():
    return FockConfig(16, 2, 1.0, 6)

@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(mod.RESULTS, key=lambda k: (int(k.split()[0].rstrip("b")), k)):
        ok, detail = mod.RESULTS[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {key}: {detail}")
