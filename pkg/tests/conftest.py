import sys

import numpy as np
import pytest

from appa.dispatch import bundled_problem


class ScriptedRng:
    """Stand-in for numpy's Generator that replays fixed uniform draws."""

    def __init__(self, values):
        self._values = list(values)

    def random(self, size=None):
        if size is None:
            return self._values.pop(0)
        n = int(np.prod(size))
        out = np.array([self._values.pop(0) for _ in range(n)])
        return out.reshape(size)


@pytest.fixture
def scripted():
    return ScriptedRng


@pytest.fixture(scope="session")
def problem1():
    return bundled_problem("problem1")


@pytest.fixture(scope="session")
def problem2():
    return bundled_problem("problem2")


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    results = getattr(acceptance, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in results:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
