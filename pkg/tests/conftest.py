import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from dcash.oracle import enable_test_oracle  # noqa: E402


@pytest.fixture(autouse=True, scope="session")
def _test_oracle():
    # the programmable oracle is a test-only trapdoor
    enable_test_oracle(True)
    yield
    enable_test_oracle(False)


@pytest.fixture
def no_test_oracle(monkeypatch):
    monkeypatch.delenv("DCASH_TEST_ORACLE", raising=False)
    enable_test_oracle(False)
    yield
    enable_test_oracle(True)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
