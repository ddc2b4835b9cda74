from __future__ import annotations

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def example_one_state(rng=None) -> np.ndarray:
    """0.8 on one vector plus 0.002 on each of 100 orthogonal vectors (7 qubits)."""
    from esdlab.states import state_from_spectrum

    w = np.zeros(128)
    w[0] = 0.8
    w[1:101] = 0.002
    return state_from_spectrum(w, rng or np.random.default_rng(7))


@pytest.fixture(scope="session")
def example_one():
    return example_one_state()


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {number:2d}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
