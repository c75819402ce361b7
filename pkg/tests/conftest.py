import pytest

ACCEPTANCE = {}


@pytest.fixture
def record():
    """Store one acceptance verdict; printed in the terminal summary."""

    def _record(criterion: int, ok: bool, detail: str):
        ACCEPTANCE[criterion] = (bool(ok), detail)
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
