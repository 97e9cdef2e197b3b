import math

import numpy as np
import pytest


def naive_ep(s, t_max=5.0, t_count=17, window_coef=0.5):
    """Full-grid Epps-Pulley by explicit loops over knots and samples."""
    s = [float(v) for v in np.ravel(s)]
    n = len(s)
    h = 2 * t_max / (t_count - 1)
    total = 0.0
    for j in range(t_count):
        t = -t_max + j * h
        re = sum(math.cos(t * x) for x in s) / n - math.exp(-t * t / 2)
        im = sum(math.sin(t * x) for x in s) / n
        wt = h / 2 if j in (0, t_count - 1) else h
        total += wt * (re * re + im * im) * math.exp(-window_coef * t * t)
    return n * total


def phi(x):
    return 0.5 * math.erfc(-x / math.sqrt(2))


def loop_matmul(X, A):
    n, k = len(X), len(X[0])
    m = len(A[0])
    return [[sum(X[i][c] * A[c][j] for c in range(k)) for j in range(m)] for i in range(n)]


@pytest.fixture
def rng():
    return np.random.default_rng(20240531)


_CRITERIA = []


@pytest.fixture
def criterion():
    """Record one acceptance line; all lines are echoed in the terminal summary."""
    def record(number, passed, detail):
        line = f"CRITERION {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        print(line)
        _CRITERIA.append(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
