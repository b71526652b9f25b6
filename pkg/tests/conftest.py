import pytest

_RESULTS = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Record ``(number, ok, detail)`` for the acceptance summary, then assert."""
    store = request.config.stash.setdefault(_RESULTS, [])

    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        store.append((number, line))
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(_RESULTS, [])
    if store:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(store):
            terminalreporter.write_line(line)
