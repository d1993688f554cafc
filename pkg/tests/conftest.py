import pytest

_RESULTS = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Record one acceptance line; it is echoed immediately and again in the terminal summary."""
    lines = request.config.stash.setdefault(_RESULTS, [])

    def record(number: int, ok: bool, detail: str) -> None:
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_RESULTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
