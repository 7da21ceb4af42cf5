"""Shared pytest plumbing.

test_acceptance.py registers a one-line verdict per criterion through
:func:`record`; the terminal-summary hook prints them as a single block
after the normal test output, so one pytest run ends with an explicit
pass/fail line for every acceptance check.
"""

acceptance_lines: list[tuple[bool, str, str]] = []


def record(name: str, ok: bool, detail: str = "") -> None:
    acceptance_lines.append((bool(ok), name, detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not acceptance_lines:
        return
    terminalreporter.section("acceptance criteria")
    for i, (ok, name, detail) in enumerate(acceptance_lines, start=1):
        verdict = "PASS" if ok else "FAIL"
        suffix = f" ({detail})" if detail else ""
        terminalreporter.write_line(f"{verdict}  {i}. {name}{suffix}")
