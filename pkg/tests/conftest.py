import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hetero_hopf.expr import load_profile  # noqa: E402

# Valid non-constant profiles used across suites. The comment gives the sign
# of T(0) = ∫(m - 1).
CORPUS = [
    "1+x",              # T(0) > 0
    "2*x",              # T(0) = 0
    "1.6*x",            # T(0) < 0, max m > 1
    "x",                # max m <= 1
    "exp(x)",           # T(0) > 0
    "1+0.5*sin(pi*x)",  # T(0) > 0
    "4*x^2",            # T(0) > 0, H < 0
]


@pytest.fixture(scope="session")
def corpus():
    return {src: load_profile(src) for src in CORPUS}


@pytest.fixture(scope="session")
def linear():
    return load_profile("1+x")


def constant(value):
    return load_profile(repr(float(value)), allow_constant=True)


# --- acceptance reporting ------------------------------------------------------

ACCEPTANCE_RESULTS: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(ACCEPTANCE_RESULTS[number])
