"""Shared pytest wiring: surface the acceptance report after capture ends."""

# One line per acceptance criterion, appended by tests/test_acceptance.py.
# Printed in the terminal summary because output capture would otherwise
# swallow in-test prints for passing tests.
acceptance_lines: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_lines:
            terminalreporter.write_line(line)
