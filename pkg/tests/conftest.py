import pytest

_LINES_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LINES_KEY] = []


@pytest.fixture
def report(request):
    """Record one acceptance line: ``report(number, title, passed, detail, seconds, limit)``."""
    lines = request.config.stash[_LINES_KEY]

    def record(number, title, passed, detail, seconds, limit):
        status = "PASS" if passed else "FAIL"
        line = f"[{status}] criterion {number:2d}: {title} | {detail} | {seconds:.3f}s (limit {limit:g}s)"
        lines.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LINES_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
