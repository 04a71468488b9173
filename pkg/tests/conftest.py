import sys
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=25)
settings.load_profile("default")

_ACCEPTANCE: list[str] = []


@pytest.fixture
def acceptance():
    """record(number, ok, detail) adds one line to the acceptance summary."""

    def record(number: int, ok: bool, detail: str) -> None:
        _ACCEPTANCE.append(f"criterion {number}: {'PASS' if ok else 'FAIL'} | {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
