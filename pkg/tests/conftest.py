import warnings

import pytest
from hypothesis import HealthCheck, settings

from smlb import schedules as sc

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def sched_small():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return sc.make_exp_then_const(200, 3.0, 1e-2)


@pytest.fixture(scope="session")
def fig1_sched():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return sc.make_exp_then_const(2000, 3.0, 1e-4)


_CRITERIA = {}


@pytest.fixture
def criterion(capsys):
    """``report(k, ok, detail)`` prints one acceptance line and returns ``ok``."""

    def report(k, ok, detail=""):
        line = f"CRITERION {k}: {'PASS' if ok else 'FAIL'} {detail}".rstrip()
        _CRITERIA.setdefault(k, []).append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_CRITERIA):
            for line in _CRITERIA[k]:
                terminalreporter.write_line(line)
