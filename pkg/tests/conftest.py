"""Shared test configuration.

Makes sibling helper modules importable and prints a per-criterion
verdict line for the acceptance tests at the end of the run.
"""

from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

CRITERIA = {
    1: "gradients match finite differences for every op and architecture loss",
    2: "beam/greedy match enumeration oracles; correlations match brute force",
    3: "forced scoring agrees with stepwise decoding; length-normalized scores",
    4: "parameter counts within 15% of published budgets with exact ordering",
    5: "English desk-scale accuracy gates",
    6: "German desk-scale F1 gates",
    7: "transformer /-s/ human fit exceeds the uni-LSTM baseline (flagged)",
    8: "smoke pipeline completes quickly with byte-identical reruns",
}

_SEVERITY = {"failed": 3, "error": 3, "skipped": 2, "passed": 1}
_results: dict[int, str] = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "criterion(n): ties a test to acceptance criterion n")
    config.addinivalue_line(
        "markers", "slow: takes more than a few seconds")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        cid = marker.args[0]
        previous = _results.get(cid)
        if previous is None or _SEVERITY[report.outcome] > _SEVERITY.get(previous, 0):
            _results[cid] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(CRITERIA):
        outcome = _results.get(cid)
        if outcome is None:
            continue
        verdict = {"passed": "PASS", "failed": "FAIL", "error": "FAIL",
                   "skipped": "SKIP"}[outcome]
        terminalreporter.write_line(f"criterion {cid}: {verdict} - {CRITERIA[cid]}")
