VERDICTS = []


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for crit, ok, detail in sorted(VERDICTS, key=lambda v: int(v[0][1:])):
        terminalreporter.write_line(f"{crit:<4} {'PASS' if ok else 'FAIL'}  {detail}")
