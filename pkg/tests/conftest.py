import pytest

# (number, title, passed, detail) rows filled in by test_acceptance.py
ACCEPTANCE: list[tuple[int, str, bool, str]] = []


@pytest.fixture
def record():
    def add(number: int, title: str, passed: bool, detail: str) -> bool:
        line = f"criterion {number} {title}: {'PASS' if passed else 'FAIL'} ({detail})"
        print(line)
        ACCEPTANCE.append((number, title, passed, detail))
        return passed

    return add


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {number} {title}: {'PASS' if passed else 'FAIL'} ({detail})")
