import math

import pytest

from capa import LinkBudget, UserSource, Wave

WAVELENGTH = 0.0107


@pytest.fixture
def wave():
    return Wave(WAVELENGTH)


@pytest.fixture
def users():
    """Reference pair: same bearing, 10 m and 20 m."""
    return UserSource(10.0, math.pi / 3, math.pi / 6), UserSource(20.0, math.pi / 3, math.pi / 6)


@pytest.fixture
def budgets():
    return LinkBudget.from_db(30.0), LinkBudget.from_db(40.0)


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            props = dict(getattr(rep, "user_properties", ()))
            if rep.when == "call" and "criterion" in props:
                lines.append((props["criterion"], "PASS" if outcome == "passed" else "FAIL", props.get("detail", "")))
    if lines:
        terminalreporter.section("acceptance criteria")
        for n, verdict, detail in sorted(lines):
            terminalreporter.write_line(f"criterion {n:2d}: {verdict}  {detail}")
