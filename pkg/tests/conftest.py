import pytest

_ACCEPTANCE = {}


@pytest.fixture
def acceptance():
    """Record the outcome of one acceptance criterion.

    ``acceptance(cid, ok, detail)`` stores the result for the terminal
    summary and returns ``ok`` so the test can assert on it.
    """

    def record(cid, ok, detail):
        _ACCEPTANCE[cid] = (bool(ok), detail)
        print(f"criterion {cid}: {'PASS' if ok else 'FAIL'} | {detail}")
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[cid]
        terminalreporter.write_line(f"criterion {cid}: {'PASS' if ok else 'FAIL'} | {detail}")
