import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

# criterion number -> list of (passed, detail), filled by test_acceptance.py
ACCEPTANCE_REPORT = {}


def record(criterion, passed, detail):
    ACCEPTANCE_REPORT.setdefault(criterion, []).append((bool(passed), detail))
    print(f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_REPORT):
        parts = ACCEPTANCE_REPORT[key]
        ok = all(p for p, _ in parts)
        detail = "; ".join(d for _, d in parts)
        terminalreporter.write_line(f"criterion {key:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
