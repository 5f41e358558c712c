import pytest

from slicesched import simulator

AUDIT = {"runs": 0, "conservation": 0, "equivalence": 0}
CRITERIA: dict[str, tuple[bool, str]] = {}


def _audit(report):
    AUDIT["runs"] += 1
    if not report.conservation_ok:
        AUDIT["conservation"] += 1
    qsum_ok = all(s.queue_sum_ok for s in report.flows.values())
    if qsum_ok != report.supports:
        AUDIT["equivalence"] += 1
    assert report.conservation_ok, "mass not conserved"
    assert qsum_ok == report.supports, "queue-sum test disagrees with expiry"


@pytest.fixture(autouse=True, scope="session")
def audit_every_simulation():
    simulator.observers.append(_audit)
    yield AUDIT
    simulator.observers.remove(_audit)


@pytest.fixture(scope="session")
def criterion():
    """Record a numbered acceptance verdict, print it, and return it for asserting."""

    def record(number, ok: bool, detail: str) -> bool:
        CRITERIA[str(number)] = (bool(ok), detail)
        print(f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    terminalreporter.write_line(
        f"simulations audited: {AUDIT['runs']}, conservation failures: {AUDIT['conservation']}, "
        f"queue-sum/expiry disagreements: {AUDIT['equivalence']}"
    )
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(CRITERIA, key=lambda k: (int(k.rstrip('abc')), k)):
            ok, detail = CRITERIA[n]
            terminalreporter.write_line(f"criterion {n:>3}: {'PASS' if ok else 'FAIL'}  {detail}")
