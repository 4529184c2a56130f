import pytest

from nslab.grid import GridSpec

# criterion number -> (passed, summary line); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def g8():
    return GridSpec(3, 8)


@pytest.fixture(scope="session")
def g16():
    return GridSpec(3, 16)


@pytest.fixture(scope="session")
def g32():
    return GridSpec(3, 32)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, line = ACCEPTANCE[num]
        tr.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {num:2d}: {line}")
