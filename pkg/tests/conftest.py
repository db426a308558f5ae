import numpy as np
import pytest

from depthbench.types import CameraIntrinsics, DepthMap


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def intrinsics():
    return CameraIntrinsics(fx=40.0, fy=42.0, cx=7.5, cy=5.5)


def random_depth(rng, h=12, w=16, lo=0.5, hi=20.0, invalid_frac=0.0):
    v = rng.uniform(lo, hi, size=(h, w))
    valid = rng.random((h, w)) >= invalid_frac
    return DepthMap(np.where(valid, v, 0.0), valid)


ACCEPTANCE_RESULTS = []


@pytest.fixture
def criterion(request):
    """Record a named acceptance criterion's outcome for the terminal summary."""
    def record(label):
        ACCEPTANCE_RESULTS.append([label, None])
        return ACCEPTANCE_RESULTS[-1]

    yield record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call" and "criterion" in item.fixturenames:
        for entry in ACCEPTANCE_RESULTS:
            if entry[1] is None:
                entry[1] = rep.passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}")
