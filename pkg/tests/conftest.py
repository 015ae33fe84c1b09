import pytest

# criterion number -> (passed, seconds, detail), filled by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, float, str]] = {}


@pytest.fixture
def acceptance():
    def record(number: int, passed: bool, seconds: float, detail: str = ""):
        ACCEPTANCE[number] = (passed, seconds, detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, seconds, detail = ACCEPTANCE[number]
        verdict = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {verdict} ({seconds:.1f} s) {detail}".rstrip())
