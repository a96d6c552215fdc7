import numpy as np
import pytest

# acceptance lines collected during the run and echoed in the summary, so
# they show up even when pytest captures stdout
ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_spd(rng, p, cond=10.0):
    Q, _ = np.linalg.qr(rng.standard_normal((p, p)))
    lam = np.exp(rng.uniform(0, np.log(cond), p))
    S = (Q * lam) @ Q.T
    return 0.5 * (S + S.T)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
