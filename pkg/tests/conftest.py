import os

import pytest
from hypothesis import settings

from qensemble import families as fm
from qensemble.qcore import QContext

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# one line per acceptance criterion, filled by tests/test_acceptance.py
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


FAMILY_CASES = [
    pytest.param((fm.little_q_jacobi(0.5, 1.5), 0.3), id="lqj"),
    pytest.param((fm.al_salam_carlitz(-1.0), 0.25), id="ac"),
    pytest.param((fm.q_laguerre(0.5), 0.25), id="qlag"),
    pytest.param((fm.big_q_jacobi(0.3, 0.2, -0.4), 0.25), id="bqj"),
]


@pytest.fixture(params=FAMILY_CASES)
def family_case(request):
    fam, q = request.param
    return fam, QContext(q)
