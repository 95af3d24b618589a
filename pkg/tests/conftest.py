import numpy as np
import pytest
from hypothesis import settings

from cadt.contour import Curve, SmoothedCurve
from cadt.synth import square, render

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def smoothed(points, closed=False) -> SmoothedCurve:
    pts = np.asarray(points, dtype=np.float64)
    return SmoothedCurve(pts, closed, None)


def chain(points, closed=False) -> Curve:
    return Curve(np.asarray(points, dtype=np.int64), closed)


@pytest.fixture
def square_image():
    shape = square(63.5, 63.5, 60.0)
    return render([shape], 128, 128), shape


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
