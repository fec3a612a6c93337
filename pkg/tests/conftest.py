import time

import pytest

from wsnpsm.experiment import SweepConfig, run_sweep

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def full_sweep():
    """The full default grid (1680 runs x 1000 samples), NOI PSD traces kept."""
    t0 = time.perf_counter()
    data = run_sweep(SweepConfig(master_seed=0), keep_psd_trace=True)
    return data, time.perf_counter() - t0


@pytest.fixture
def criterion():
    def record(number: int, title: str, ok: bool, detail: str = "") -> None:
        line = f"[{'PASS' if ok else 'FAIL'}] AC{number} {title}" + (f": {detail}" if detail else "")
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
