import numpy as np
import pytest

from hilbert_ou.spectral import build_spectrum


@pytest.fixture(scope="session")
def spec64():
    return build_spectrum("power-law", 64, gamma=2.0)


@pytest.fixture(scope="session")
def unit1():
    return build_spectrum("explicit", values=[1.0])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for k in range(1, 14):
        terminalreporter.write_line(lines.get(k, f"criterion {k:2d}: FAIL  check did not complete"))
