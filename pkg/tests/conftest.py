import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))


def pytest_terminal_summary(terminalreporter):
    try:
        import test_acceptance
    except ImportError:
        return
    if not test_acceptance.STARTED:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(test_acceptance.STARTED):
        line = test_acceptance.PASS_LINES.get(
            name, f"[FAIL] {name} - criterion did not pass (see failures above)"
        )
        terminalreporter.write_line(line)
