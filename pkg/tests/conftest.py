import numpy as np
import pytest
from hypothesis import settings

from specgeom.spaces import FiniteMetricSpace

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


def matrix_space(rows):
    return FiniteMetricSpace(np.array(rows, dtype=np.float64))


@pytest.fixture
def collinear():
    """Points 0-1-2 on a line with unit gaps."""
    return matrix_space([[0, 1, 2], [1, 0, 1], [2, 1, 0]])


def planar(rng, n):
    pts = rng.random((n, 2))
    return FiniteMetricSpace(np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1)))


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for r in results.values():
            terminalreporter.write_line(r.line())
