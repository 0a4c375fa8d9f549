import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

from tightcycles import Filtration, SparseMetricSpace  # noqa: E402

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

SQUARE_EDGES = [(0, 1, 1.0), (1, 2, 1.5), (2, 3, 2.0), (0, 3, 2.5), (0, 2, 2.75)]


@pytest.fixture
def square_space():
    return SparseMetricSpace.from_edges(4, SQUARE_EDGES, threshold=2.75)


@pytest.fixture
def square_prefix(square_space):
    """The first ten simplices of the worked example's filtration."""
    return Filtration(square_space, 2).truncate(10)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def fib_sphere(n, radius=1.0, center=(0.0, 0.0, 0.0)):
    i = np.arange(n) + 0.5
    phi = np.arccos(1 - 2 * i / n)
    th = np.pi * (1 + 5 ** 0.5) * i
    P = np.c_[np.cos(th) * np.sin(phi), np.sin(th) * np.sin(phi), np.cos(phi)]
    return radius * P + np.asarray(center)


def circle(n, radius=1.0, noise=0.0, rng=None):
    t = np.linspace(0, 2 * np.pi, n, endpoint=False)
    P = radius * np.c_[np.cos(t), np.sin(t)]
    if noise and rng is not None:
        P = P + rng.normal(0, noise, P.shape)
    return P


ACCEPTANCE_LINES: list = []


def report_criterion(number, ok, detail=""):
    line = f"ACCEPTANCE {number}: {'PASS' if ok else 'FAIL'}" + (f"  ({detail})" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
