import math
import re

import numpy as np
import pytest

from semcom import parse_config

_CRITERION_PATTERN = re.compile(r"test_criterion_(\d+)_(\w+)")


def pytest_terminal_summary(terminalreporter):
    """One pass/fail line per acceptance criterion."""
    rows = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            if getattr(rep, "when", "call") != "call":
                continue
            m = _CRITERION_PATTERN.search(rep.nodeid)
            if m:
                rows.append((int(m.group(1)), m.group(2), outcome.upper()))
    if not rows:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for num, name, outcome in sorted(rows):
        status = "PASS" if outcome == "PASSED" else "FAIL"
        terminalreporter.write_line(f"criterion {num:2d} [{name}]: {status}")


@pytest.fixture(scope="session")
def vret():
    return parse_config("vret")


@pytest.fixture(scope="session")
def vret_space(vret):
    return vret.space


@pytest.fixture(scope="session")
def vret_concepts(vret):
    return vret.concepts


def binomial_se(p: float, n: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 1e-12) / n)


def vret_distortion(a, b) -> float:
    """Independent oracle for the emotion+stimulus distortion: two plain 2-norms."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(
        math.hypot(a[0] - b[0], a[1] - b[1]) + math.hypot(a[2] - b[2], a[3] - b[3])
    )


MILD = (0.375, 0.625, 0.875, 0.125)
MODERATE = (0.250, 0.750, 0.500, 0.500)
EXTREME = (0.125, 0.875, 0.125, 0.875)
