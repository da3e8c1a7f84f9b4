import numpy as np
import pytest

from dyrac.controller import TriggerKind
from dyrac.fileio import load_scenario
from dyrac.geometry import DesignParams
from dyrac.simulator import simulate

MM = 1e-3


@pytest.fixture(scope="session")
def params():
    return DesignParams()


def construct_points(params, r, alpha, side=1.0):
    """2-D placement of O, B, P, A with P on the +x axis.

    B lies on the ``side`` half plane. Used as an independent oracle for
    the closed-form geometry.
    """
    a, rd, l = params.a, params.r_D, params.l
    O = np.zeros(2)
    P = np.array([r, 0.0])
    x = (a * a - rd * rd + r * r) / (2 * r)
    B = np.array([x, side * np.sqrt(max(a * a - x * x, 0.0))])
    A = l * np.array([np.cos(alpha), np.sin(alpha)])
    return O, B, P, A


def vector_angle(u, v):
    return float(np.arccos(np.clip(u @ v / np.linalg.norm(u) / np.linalg.norm(v), -1.0, 1.0)))


@pytest.fixture(scope="session")
def hammer_runs():
    """The bundled swing scenarios plus the low-stiffness run without the damping trigger."""
    low = load_scenario("hammer_low_stiffness")
    high = load_scenario("hammer_high_stiffness")
    low_no_trigger = low.with_changes(trigger=low.trigger.__class__(TriggerKind.NONE, 0.01, 0.5))
    return {
        "low": (low, simulate(low)),
        "high": (high, simulate(high)),
        "low_no_trigger": (low_no_trigger, simulate(low_no_trigger)),
    }


ACCEPTANCE_RESULTS = []


def record_criterion(number, passed, detail):
    """Print and remember one acceptance line; the caller asserts ``passed``."""
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}"
    print(line)
    ACCEPTANCE_RESULTS.append(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(line)
