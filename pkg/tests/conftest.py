import pytest

ACCEPTANCE = {}

CRITERIA = {
    1: "spectrum of M on random time-like jets",
    2: "extremal identity and tangent annihilation",
    3: "linear degeneracy in both charts",
    4: "exact speed transport and conservation identity",
    5: "characteristic-chart diffeomorphism",
    6: "flat runs against the d'Alembert formula",
    7: "Cartesian vs spherical equatorial runs",
    8: "global-existence regime on the epsilon family",
    9: "failure modes: gap collapse and horizon refusal",
}


@pytest.fixture
def acceptance():
    """Record ``(criterion, passed, detail)`` for the terminal summary."""

    def record(criterion, passed, detail=""):
        ACCEPTANCE[criterion] = (bool(passed), detail)
        print(f"criterion {criterion} {'PASS' if passed else 'FAIL'}: {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(CRITERIA):
        if k in ACCEPTANCE:
            ok, detail = ACCEPTANCE[k]
            terminalreporter.write_line(
                f"criterion {k} {'PASS' if ok else 'FAIL'} - {CRITERIA[k]}: {detail}")
        else:
            terminalreporter.write_line(f"criterion {k} NOT RUN - {CRITERIA[k]}")
