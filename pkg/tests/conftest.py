import re
from collections import defaultdict

CRITERION = re.compile(r"test_acceptance\.py::test_criterion_(\d+)_(\w+?)(?:\[|$)")


def pytest_terminal_summary(terminalreporter):
    outcomes = defaultdict(list)
    names = {}
    for key in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(key, []):
            match = CRITERION.search(rep.nodeid)
            if match and (rep.when == "call" or key == "error"):
                num = int(match.group(1))
                names[num] = match.group(2)
                outcomes[num].append(key == "passed")
    if not outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(outcomes):
        status = "PASS" if all(outcomes[num]) else "FAIL"
        terminalreporter.write_line(f"criterion {num:2d} {names[num]}: {status}")
