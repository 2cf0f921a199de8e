"""Shared pytest wiring.

The only hook here prints a one-line verdict per deliverable check from
test_acceptance.py at the end of the run, so the terminal (and any tee'd log)
ends with a compact scoreboard.
"""


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    verdicts = {}
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py::test_criterion_" not in nodeid:
                continue
            if outcome != "error" and getattr(rep, "when", "call") != "call":
                continue
            name = nodeid.rsplit("::", 1)[-1]
            key = name[len("test_criterion_"):][:2]
            verdicts[key] = (name, "PASS" if outcome == "passed" else "FAIL")
    if not verdicts:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for key in sorted(verdicts):
        name, verdict = verdicts[key]
        terminalreporter.write_line(f"criterion {key} ({name}): {verdict}")
