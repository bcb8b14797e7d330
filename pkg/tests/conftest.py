import math
import time

import pytest

from bundle_spectra import BundleSpec, TorusSpec, build_links

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(cid, title): acceptance criterion test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or rep.when != "call":
        return
    cid, title = marker.args
    _CRITERIA[cid] = (title, rep.outcome, rep.duration)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_CRITERIA, key=lambda c: int(c[2:])):
        title, outcome, duration = _CRITERIA[cid]
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{cid} {verdict} ({duration:.2f}s) {title}")


@pytest.fixture
def unit_torus():
    def make(N=8, n=3):
        return TorusSpec((1.0,) * n, (N,) * n)
    return make


@pytest.fixture
def flat_links():
    def make(torus, theta):
        b = BundleSpec.flat(theta)
        return b, build_links(torus, b)
    return make


class Stopwatch:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


@pytest.fixture
def stopwatch():
    return Stopwatch


PI = math.pi
