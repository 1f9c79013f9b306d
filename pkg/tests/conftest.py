import numpy as np
import pytest

from bsfl.core import SystemParams
from bsfl.optimizer import ScoreTable


def random_table(rng, K, m, alpha=1.0, unobserved=0.0, ties=False):
    """A score table with optional unobserved (+inf) clients and deliberately tied values."""
    if ties:
        scores = rng.integers(0, 3, K) / 2.0
        g = rng.integers(-2, 3, K) / 4.0
    else:
        scores = rng.uniform(0.0, 1.0, K)
        g = rng.uniform(-1.0, 1.0, K)
    if unobserved:
        scores[rng.random(K) < unobserved] = np.inf
    return ScoreTable.build(scores, g, alpha, m)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def params20():
    return SystemParams(20, 5, alpha=1.0, beta=2)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict[str, str] = {}


def report(criterion: str, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES[criterion] = f"{criterion}: {'PASS' if ok else 'FAIL'} | {detail}"
    print(ACCEPTANCE_LINES[criterion])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
