import os
import warnings

import pytest
from hypothesis import HealthCheck, settings

from sfca.learners.linear import SingularSystemWarning
from sfca.pipeline import records_from_corpus
from sfca.synth import generate_corpus

settings.register_profile(
    "sfca", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "sfca"))


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, text): acceptance criterion")


_CRITERIA = {}


def pytest_runtest_logreport(report):
    marker = getattr(report, "criterion", None)
    if marker is None:
        return
    number, text = marker
    previous = _CRITERIA.get(number, (True, text, ""))[0]
    failed = report.failed
    if report.when == "call" or failed:
        detail = "" if not failed else report.longreprtext.strip().splitlines()[-1][:160]
        _CRITERIA[number] = (previous and not failed, text, detail)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is not None:
        rep.criterion = (m.args[0], m.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        ok, text, detail = _CRITERIA[number]
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {text}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def small_corpus():
    """Twelve cities over two weeks, noise 0.03."""
    return generate_corpus(12, 14, seed=5, noise_sigma=0.03)


@pytest.fixture(scope="session")
def small_records(small_corpus):
    return {s: records_from_corpus(small_corpus, s) for s in ("internet", "electricity")}


@pytest.fixture(autouse=True)
def _quiet_singular():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SingularSystemWarning)
        yield
