import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

# Statistical tests get one retry with a second, pre-declared seed (the
# documented flaky budget: at most one retry per stochastic test).
RETRY_SEEDS = (20241, 77003)


def with_retry(check):
    """Run ``check(seed)`` with the first seed; on AssertionError run it once more."""
    try:
        return check(RETRY_SEEDS[0])
    except AssertionError:
        return check(RETRY_SEEDS[1])


# One PASS/FAIL line per acceptance criterion, echoed again in the terminal
# summary so that it survives output capture.
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
