import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

_ACCEPTANCE_RESULTS: list[tuple[str, bool]] = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def record_acceptance(name: str, ok: bool) -> None:
    _ACCEPTANCE_RESULTS.append((name, ok))


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for name, ok in _ACCEPTANCE_RESULTS:
            terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {name}")
