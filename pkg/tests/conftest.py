import re

import numpy as np
import pytest

_CRITERION = re.compile(r"test_criterion_(\d+)_(\w+)")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    rows = {}
    for status in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(status, []):
            if rep.when != "call" and status != "error":
                continue
            m = _CRITERION.search(rep.nodeid)
            if not m or "test_acceptance" not in rep.nodeid:
                continue
            n = int(m.group(1))
            ok = status == "passed"
            rows[n] = (ok and rows.get(n, (True, ""))[0], m.group(2).replace("_", " "))
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(rows):
        ok, label = rows[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {label}")
