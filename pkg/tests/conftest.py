import contextlib
import time

import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")

_CRITERIA: list[str] = []


@pytest.fixture
def criterion():
    """Time a block, print one PASS/FAIL line, and fail if it runs over budget."""

    @contextlib.contextmanager
    def run(number, title, budget_s):
        start = time.perf_counter()
        status = "FAIL"
        try:
            yield
            elapsed = time.perf_counter() - start
            assert elapsed < budget_s, f"took {elapsed:.2f}s, budget {budget_s}s"
            status = "PASS"
        finally:
            elapsed = time.perf_counter() - start
            line = f"criterion {number}: {status}  {title}  [{elapsed:.2f}s / {budget_s}s]"
            print(line)
            _CRITERIA.append(line)

    return run


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
