import pytest

_LINES = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line; lines are echoed live and again in the terminal summary."""
    lines = request.config.stash.setdefault(_LINES, [])
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")

    def record(label: str, passed: bool, detail: str) -> None:
        line = f"{'PASS' if passed else 'FAIL'}  {label}: {detail}"
        lines.append(line)
        print(line)
        if reporter is not None:
            reporter.write_line("")
            reporter.write_line(line)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
