from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from deflab.experiment import BinaryExperiment, random_binary

settings.register_profile(
    "deflab", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("deflab")

E0_STATES = (np.diag([0.75, 0.25]), np.diag([0.5, 0.5]))
F0_STATES = (np.eye(2) / 2, np.eye(2) / 2)
E1_STATES = (np.diag([0.9, 0.1]), np.array([[0.5, 0.4], [0.4, 0.5]]))


@pytest.fixture
def E0() -> BinaryExperiment:
    return BinaryExperiment(*E0_STATES)


@pytest.fixture
def F0() -> BinaryExperiment:
    return BinaryExperiment(*F0_STATES)


@pytest.fixture
def E1() -> BinaryExperiment:
    return BinaryExperiment(*E1_STATES)


seeds = st.integers(min_value=0, max_value=2**32 - 1)
dims = st.integers(min_value=2, max_value=4)


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    Q, R = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def make_experiment(seed: int, n: int, rank: int | None = None) -> BinaryExperiment:
    return random_binary(n, np.random.default_rng(seed), rank)


# (criterion, passed, elapsed seconds, detail) appended by test_acceptance.py
ACCEPTANCE: list[tuple[int, bool, float, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n, ok, elapsed, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {n} ({elapsed:.1f}s): {detail}")
