import pytest

from crossover.flow import FlowParams
from crossover.kernels import build_kernels


@pytest.fixture(scope="session")
def ks_01():
    return build_kernels(2, 0.1)


@pytest.fixture(scope="session")
def fp_01(ks_01):
    return FlowParams(2, 0.1, ks_01.a_coeff)


# one summary line per acceptance criterion, derived from test names
# of the form test_criterion_NN_<what>
_CRITERIA: dict = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.rsplit("::", 1)[-1]
    if not name.startswith("test_criterion_"):
        return
    if report.when != "call" and not report.failed:
        return
    num = int(name.split("_")[2])
    _CRITERIA.setdefault(num, []).append((name.split("[")[0], report.passed))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        parts = _CRITERIA[num]
        ok = all(p for _, p in parts)
        failed = sorted({n for n, p in parts if not p})
        note = "" if ok else "  (failing: " + ", ".join(failed) + ")"
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}{note}")
