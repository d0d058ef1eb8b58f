import pytest

ACCEPTANCE_LINES: list[str] = []


class CriterionRecorder:
    def __init__(self):
        self.number = None
        self.title = ""
        self.line = None

    def start(self, number: int, title: str) -> None:
        self.number, self.title = number, title

    def finish(self, checks: dict, detail: str = "") -> None:
        """Record one PASS/FAIL line and fail the test if any check is false."""
        failed = [name for name, ok in checks.items() if not ok]
        verdict = "FAIL" if failed else "PASS"
        self.line = f"CRITERION {self.number} {verdict}: {self.title}"
        if detail:
            self.line += f" [{detail}]"
        if failed:
            self.line += f" failed={failed}"
        ACCEPTANCE_LINES.append(self.line)
        print(self.line)
        assert not failed, self.line


@pytest.fixture
def criterion():
    rec = CriterionRecorder()
    yield rec
    if rec.line is None and rec.number is not None:
        ACCEPTANCE_LINES.append(f"CRITERION {rec.number} FAIL: {rec.title} [did not complete]")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
