"""Shared pytest hooks: print one pass/fail line per acceptance check."""

from __future__ import annotations

_acceptance: list[tuple[str, bool]] = []


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    _acceptance.append((name, report.passed))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance:
        return
    terminalreporter.write_line("")
    terminalreporter.write_line("acceptance checks:")
    for name, ok in _acceptance:
        terminalreporter.write_line(f"  [{'PASS' if ok else 'FAIL'}] {name}")
