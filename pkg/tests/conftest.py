from __future__ import annotations

import pytest

from pseudochain.topology import PseudoChainSpec

ACCEPTANCE_LINES: list[str] = []


def record(line: str) -> None:
    """Collect an acceptance verdict line; printed at the end of the session."""
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def chain121():
    return PseudoChainSpec.from_lists((1, 2, 1), (1.0, 1.0))


@pytest.fixture
def chain131():
    return PseudoChainSpec.from_lists((1, 3, 1), (1.0, 1.0))


@pytest.fixture
def linear3():
    return PseudoChainSpec.linear((1.0, 1.0))
