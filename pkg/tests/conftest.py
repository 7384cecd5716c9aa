def pytest_terminal_summary(terminalreporter):
    # surface the acceptance lines even when stdout is captured
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
