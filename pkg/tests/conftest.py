import math
import time
from pathlib import Path

import pytest

from gauge_rig import GaugePolicy, integrate, prepare_initial_data, reference_framework

INPUTS = Path(__file__).resolve().parent.parent / "inputs"
PERIOD = 2.0 * math.pi


@pytest.fixture(scope="session")
def reference_system():
    return reference_framework(1.0, 1.0)


@pytest.fixture(scope="session")
def rotating_point(reference_system):
    framework, configuration = reference_system
    return prepare_initial_data(framework, configuration, omega=1.0, lam=0.0)


def _timed_run(framework, point, policy):
    start = time.perf_counter()
    trajectory = integrate(framework, point, policy, PERIOD, 1e-3)
    return trajectory, time.perf_counter() - start


@pytest.fixture(scope="session")
def period_run_xi_zero(reference_system, rotating_point):
    framework, _ = reference_system
    return _timed_run(framework, rotating_point, GaugePolicy.zero())


@pytest.fixture(scope="session")
def period_run_xi_cos(reference_system, rotating_point):
    framework, _ = reference_system
    return _timed_run(framework, rotating_point, GaugePolicy.cosine(1.0, 1.0))
