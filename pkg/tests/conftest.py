import random
import re

import pytest
from hypothesis import HealthCheck, settings

from pployalty import _backend, crypto_core, pbsig

settings.register_profile(
    "default",
    deadline=None,
    max_examples=50,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("default")

MOVIES = """\
Product
  DigitalMedia
    Movie
      ActionMovie
        Inception
        TheMatrix
      Drama
        Amelie
    Music
      Rock
        Queen
"""


@pytest.fixture(scope="session")
def params():
    return crypto_core.setup()


@pytest.fixture
def rng():
    return random.Random(20261016)


@pytest.fixture(scope="session")
def keys(params):
    return pbsig.keygen(params, random.Random(7))


@pytest.fixture
def movies_doc():
    return MOVIES


def native_available():
    return "native" in _backend.available()


needs_native = pytest.mark.skipif(not native_available(), reason="compiled backend not built")


# -- acceptance summary ------------------------------------------------------------

_CRITERION = re.compile(r"test_criterion_(\d+)_")
_results = {}


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if not m:
        return
    n = int(m.group(1))
    failed = report.failed or (report.when == "call" and report.skipped)
    prev = _results.get(n, "PASS")
    if report.when == "call" or report.failed:
        _results[n] = "FAIL" if failed or prev == "FAIL" else "PASS"


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_results):
        terminalreporter.write_line(f"criterion {n:2d}: {_results[n]}")
