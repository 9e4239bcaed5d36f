import pytest

_STASH = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_STASH] = []


@pytest.fixture
def criterion(request):
    """Record one acceptance line: ``criterion(number, title, passed, detail)``."""
    lines = request.config.stash[_STASH]

    def record(number, title, passed, detail):
        line = f"criterion {number} {'PASS' if passed else 'FAIL'}: {title} ({detail})"
        lines.append((number, line))
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_STASH, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(lines, key=lambda x: x[0]):
        terminalreporter.write_line(line)
