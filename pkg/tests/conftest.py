import numpy as np
import pytest

from sqrtlasso.core import Dataset


def random_dataset(n, p, seed, s=3, sigma=1.0, t_errors=False):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, p))
    beta = np.zeros(p)
    beta[: min(s, p)] = rng.choice([-1.0, 1.0], size=min(s, p)) * rng.uniform(0.5, 2.0, size=min(s, p))
    eps = rng.standard_t(4, size=n) / np.sqrt(2) if t_errors else rng.standard_normal(n)
    return Dataset.from_raw(x, x @ beta + sigma * eps)


@pytest.fixture
def small_dataset():
    return random_dataset(50, 20, seed=1)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
