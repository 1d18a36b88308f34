import numpy as np
import pytest


def binomial_cascade(p, levels):
    """Deterministic binomial multiplicative measure on 2**levels cells."""
    w = np.array([1.0])
    for _ in range(levels):
        w = np.column_stack([w * p, w * (1.0 - p)]).ravel()
    return w


def binomial_tau(q, p):
    q = np.asarray(q, dtype=float)
    return -np.log2(p ** q + (1.0 - p) ** q)


def sample_generalized_gamma(n, beta, gamma, delta, seed):
    """Exact draws: gamma * X**delta is Gamma((1 - beta) / delta) distributed."""
    rng = np.random.default_rng(seed)
    y = rng.gamma((1.0 - beta) / delta, 1.0, size=n)
    return (y / gamma) ** (1.0 / delta)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)



# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE = {}


def record_criterion(number, passed, detail):
    ACCEPTANCE[number] = (passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        status = {True: "PASS", False: "FAIL", None: "SKIP"}[passed]
        terminalreporter.write_line(f"criterion {number}: {status}  {detail}")
