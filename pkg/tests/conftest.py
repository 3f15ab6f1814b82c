import time

import pytest
from hypothesis import settings

settings.register_profile("pqgl", deadline=None, print_blob=True)
settings.load_profile("pqgl")

_ACCEPTANCE = []


class AcceptanceLog:
    """Records one pass/fail line per acceptance criterion, with its runtime budget."""

    def __init__(self, number: int, title: str, budget: float):
        self.number, self.title, self.budget = number, title, budget

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.start
        over = elapsed > self.budget
        ok = exc_type is None and not over
        note = f"{elapsed:.2f}s / {self.budget:g}s"
        if exc_type is not None:
            note += f"; {exc_type.__name__}: {str(exc).splitlines()[0] if str(exc) else ''}"
        elif over:
            note += "; over runtime budget"
        line = f"criterion {self.number} {'PASS' if ok else 'FAIL'}  {self.title}  ({note})"
        _ACCEPTANCE.append(line)
        print(line)
        if over and exc_type is None:
            pytest.fail(f"criterion {self.number} took {elapsed:.2f}s, budget {self.budget:g}s")
        return False


@pytest.fixture
def criterion():
    return AcceptanceLog


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
