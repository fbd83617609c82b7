import numpy as np
import pytest
from hypothesis import settings

from l1rates.operators import make_operator

settings.register_profile("fixed", derandomize=True, deadline=None)
settings.load_profile("fixed")

ACCEPTANCE_LINES = []


@pytest.fixture
def diag16():
    return make_operator("Diagonal", {"a": 1}, N=16)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def acceptance_log():
    def record(number, ok, detail):
        ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}")
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)


def random_operator(rng, M, N):
    return make_operator("Custom", {"matrix": rng.standard_normal((M, N))})
