"""Shared pytest plumbing: collect acceptance-gate lines and echo them
in the terminal summary so they are visible under captured output."""

GATE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if GATE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in GATE_LINES:
            terminalreporter.write_line(line)
