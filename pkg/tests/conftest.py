import pytest

_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_KEY] = []


@pytest.fixture
def criterion(request):
    """``criterion(n, ok, detail)`` prints and records one acceptance line."""
    lines = request.config.stash[_KEY]

    def report(n, ok, detail):
        line = f"CRITERION {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        lines.append((n, line))
        return ok

    return report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_KEY, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(lines):
        terminalreporter.write_line(line)
