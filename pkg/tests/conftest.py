import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fxpgm.certify import Exhaustive  # noqa: E402

CRITERIA = {
    1: "assertion example reproduced exactly",
    2: "certificate arithmetic from tabulated bounds",
    3: "bisection bounds equal exhaustive extremes on reduced configs",
    4: "fixed-point programs match the rational oracle",
    5: "exact and fixed-point PGM inequalities",
    6: "end-to-end soundness of certified bounds",
    7: "MPC condensation pipeline",
    8: "Omega monotone in q",
}
_outcomes: dict[int, list[tuple[str, str]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        if hasattr(rep, "wasxfail"):
            state = "xfail" if rep.skipped else "xpass"
        else:
            state = rep.outcome
        _outcomes.setdefault(m.args[0], []).append((item.name, state))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(CRITERIA):
        results = _outcomes.get(n)
        if not results:
            continue
        bad = [name for name, st in results if st != "passed"]
        verdict = "PASS" if not bad else "FAIL"
        line = f"criterion {n}: {verdict}  {CRITERIA[n]} ({len(results) - len(bad)}/{len(results)} checks)"
        if bad:
            line += "; not met: " + ", ".join(
                f"{name} (known discrepancy, strict xfail)" if st == "xfail" else name
                for name, st in results if st != "passed")
        tr.write_line(line)


@pytest.fixture(scope="session")
def exhaustive():
    """One cached exhaustive backend shared by the whole session."""
    return Exhaustive(workers=4)
