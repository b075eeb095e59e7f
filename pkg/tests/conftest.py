import pytest

_LINES = []


class _Recorder:
    def __call__(self, label: str, ok: bool, detail: str = ""):
        line = f"[{'PASS' if ok else 'FAIL'}] {label}" + (f": {detail}" if detail else "")
        _LINES.append(line)
        print(line)
        return ok


@pytest.fixture(scope="session")
def acceptance():
    return _Recorder()


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
