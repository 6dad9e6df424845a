import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_RESULTS_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_RESULTS_KEY] = []


@pytest.fixture
def criterion(request):
    """Record ``(number, name, ok, detail)`` for the acceptance summary."""

    def record(number, name, ok, detail=""):
        request.config.stash[_RESULTS_KEY].append((number, name, bool(ok), detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(_RESULTS_KEY, [])
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, ok, detail in sorted(results, key=lambda r: (r[0], r[1])):
        line = f"[{'PASS' if ok else 'FAIL'}] {number:>2}. {name}"
        terminalreporter.write_line(line + (f"  ({detail})" if detail else ""))
