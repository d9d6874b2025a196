import numpy as np
import pytest

from plprior.imaging import Intrinsics


@pytest.fixture
def K():
    return Intrinsics(fx=500.0, fy=500.0, cx=320.0, cy=240.0)


@pytest.fixture
def K_small():
    return Intrinsics(fx=60.0, fy=55.0, cx=31.5, cy=23.5, width=64, height=48)


def random_visible_plane(rng, K, h, w, depth_range=(1.0, 6.0)):
    """Unit normal and offset of a plane with positive depth across the whole image."""
    while True:
        n = rng.normal(size=3)
        n[2] = abs(n[2]) + 0.5
        n /= np.linalg.norm(n)
        offset = rng.uniform(*depth_range)
        corners = np.array([[(u - K.cx) / K.fx, (v - K.cy) / K.fy, 1.0]
                            for u in (0, w - 1) for v in (0, h - 1)])
        inv = corners @ n / offset
        if np.all(inv > 1 / 20):
            return n, offset


# ---------------------------------------------------------------- acceptance report

_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label, text): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is None or not (rep.when == "call" or rep.failed):
        return
    label, text = m.args
    ok = rep.passed and _ACCEPTANCE.get(label, (True,))[0]
    _ACCEPTANCE[label] = (ok, text)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, (ok, text) in _ACCEPTANCE.items():
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label:>3}  {text}")
