from __future__ import annotations

import numpy as np
import pytest

from periodica import TimeSeries
from periodica.periodogram import build_log_grid


def noisy_harmonic(n=40, theta=3.3, amp=1.0, noise=0.5, span=60.0, seed=0, sigma=None):
    rng = np.random.default_rng(seed)
    t = np.sort(rng.uniform(0.0, span, n))
    y = 2.0 + amp * np.cos(2 * np.pi * t / theta) + noise * rng.normal(size=n)
    s = np.full(n, noise if sigma is None else sigma) if noise > 0 or sigma else np.ones(n)
    return TimeSeries(t, y, s)


@pytest.fixture
def series():
    return noisy_harmonic()


@pytest.fixture
def grid():
    return build_log_grid(0.5, 30.0, 400)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
