import re
from collections import OrderedDict

import numpy as np
import pytest

from fedwards.kernel import basis_for
from fedwards.model import ModelParams

_CRITERIA = OrderedDict()
_CRIT_RE = re.compile(r"test_criterion_(\d+)_")


@pytest.fixture(scope="session")
def params():
    return ModelParams()


@pytest.fixture(scope="session")
def gb(params):
    return basis_for(params)


@pytest.fixture
def gen():
    return np.random.default_rng(20240611)


def pytest_runtest_logreport(report):
    m = _CRIT_RE.search(report.nodeid)
    if not m:
        return
    if report.when == "call" or report.outcome != "passed":
        key = int(m.group(1))
        ok = report.outcome == "passed"
        name = report.nodeid.split("::")[-1]
        status, names = _CRITERIA.get(key, (True, []))
        _CRITERIA[key] = (status and ok, names + [f"{name} {'ok' if ok else report.outcome}"])


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_CRITERIA):
        ok, parts = _CRITERIA[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  ({'; '.join(parts)})")
