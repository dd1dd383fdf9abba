import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict(request):
    """Record a one-line pass/fail verdict printed at the end of the run."""
    state = {"detail": ""}
    yield state
    failed = getattr(request.node, "rep_call", None) is None or request.node.rep_call.failed
    line = f"{state['name']}: {'FAIL' if failed else 'PASS'}"
    if state["detail"]:
        line += f"  {state['detail']}"
    ACCEPTANCE_LINES.append(line)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
