import numpy as np
import pytest
from hypothesis import settings

from bspp.core import PointPattern, Window

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def uniform_pattern(n, seed=0, window=None):
    window = window or Window.unit()
    rng = np.random.default_rng(seed)
    xy = np.column_stack([
        window.x_min + rng.random(n) * window.width,
        window.y_min + rng.random(n) * window.height,
    ])
    return PointPattern(xy, window)


@pytest.fixture
def unit():
    return Window.unit()


@pytest.fixture
def pattern77():
    return uniform_pattern(77, seed=77)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
