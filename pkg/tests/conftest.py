import math

import numpy as np
import pytest
from hypothesis import settings

from metawg.bands import dispersion_context
from metawg.device import REFERENCE_QI, reference_cell

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture(scope="session")
def cell():
    return reference_cell()


@pytest.fixture(scope="session")
def context(cell):
    return dispersion_context(cell)


@pytest.fixture(scope="session")
def edges(context):
    return context[0]


@pytest.fixture(scope="session")
def line(context):
    return context[1]


@pytest.fixture(scope="session")
def gamma_i(edges):
    return edges.omega_c_plus / REFERENCE_QI


def ghz(f):
    return 2.0 * math.pi * 1e9 * f


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# --- acceptance summary -------------------------------------------------------------------
# Tests marked ``criterion(number, title)`` report one PASS/FAIL line each in the
# terminal summary.  ``detail`` user properties are appended to the line; a
# ``verdict`` property overrides the word printed for a passing soft check.

_CRITERIA: dict[int, tuple[str, str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    # the call phase decides the verdict; setup/teardown only report failures
    if marker is None or (report.when != "call" and report.passed):
        return
    number, title = marker.args
    props = dict(item.user_properties)
    if report.passed:
        verdict = props.get("verdict", "PASS")
    elif report.skipped:
        verdict = "SKIP"
    else:
        verdict = "FAIL"
    details = "; ".join(v for k, v in item.user_properties if k == "detail")
    _CRITERIA[number] = (verdict, title, details)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        verdict, title, details = _CRITERIA[number]
        line = f"criterion {number:2d} {verdict:4s} {title}"
        terminalreporter.write_line(f"{line} -- {details}" if details else line)
