def pytest_terminal_summary(terminalreporter):
    """One pass/fail line per acceptance criterion, taken from the recorded properties."""
    rows = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            props = dict(getattr(rep, "user_properties", ()))
            if "criterion" not in props or (outcome != "error" and rep.when != "call"):
                continue
            rows.append((int(props["criterion"]), outcome, props.get("detail", "")))
    if not rows:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number, outcome, detail in sorted(rows):
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d}: {verdict}  {detail}")
