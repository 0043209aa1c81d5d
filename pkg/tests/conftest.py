acceptance_results: list[str] = []


def record_criterion(name: str, passed: bool, detail: str):
    """Log one acceptance criterion outcome for the end-of-run summary."""
    acceptance_results.append(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if acceptance_results:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_results:
            terminalreporter.write_line(line)
