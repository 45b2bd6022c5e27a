import pytest

ACCEPTANCE = []


@pytest.fixture
def criterion(request):
    """Record one acceptance-criterion outcome for the end-of-run summary."""
    entry = {"name": request.node.name, "detail": ""}
    ACCEPTANCE.append(entry)

    def note(number, title, detail=""):
        entry.update(number=number, title=title, detail=detail)

    yield note
    rep = getattr(request.node, "rep_call", None)
    entry["passed"] = bool(rep is not None and rep.passed)
    entry["xfail"] = bool(rep is not None and hasattr(rep, "wasxfail"))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for e in sorted(ACCEPTANCE, key=lambda e: (e.get("number", 99), e["name"])):
        status = "PASS" if e.get("passed") else "FAIL"
        tr.write_line(f"[{status}] criterion {e.get('number', '?'):>2}: {e.get('title', e['name'])}"
                      f"  {e.get('detail', '')}")
