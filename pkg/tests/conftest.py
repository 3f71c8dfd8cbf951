import time

import pytest
from hypothesis import strategies as st

from photonsearch.cyclo import CycNum
from photonsearch.state import PhotonicState

ACCEPTANCE_LINES: list[str] = []


def small_cyc(bound: int = 4):
    """Strategy for CycNum with small integer/half-integer coefficients."""
    c = st.integers(-bound, bound)
    return st.builds(lambda a, b, x, y, d: CycNum.from_ints((a, b, x, y), d), c, c, c, c, st.sampled_from([1, 2, 3]))


def ket_state(*kets, amps=None):
    amps = amps or [1] * len(kets)
    return PhotonicState.from_slots(dict(zip(kets, amps)))


GHZ3 = ket_state((0, 0, 0), (1, 1, 1), (2, 2, 2))


class AcceptanceReport:
    def __init__(self, number: int, title: str):
        self.number = number
        self.title = title
        self.started = time.perf_counter()

    def record(self, ok: bool, detail: str = "") -> bool:
        took = time.perf_counter() - self.started
        line = f"[criterion {self.number:>2}] {'PASS' if ok else 'FAIL'} {self.title} ({took:.1f}s) {detail}".rstrip()
        print(line)
        ACCEPTANCE_LINES.append(line)
        return ok


@pytest.fixture
def acceptance():
    return AcceptanceReport


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
