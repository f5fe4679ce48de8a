import numpy as np
import pytest

_CRITERIA: dict[str, dict] = {}


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    cid, text = mark.args
    entry = _CRITERIA.setdefault(cid, {"text": text, "ok": True, "details": []})
    if call.when == "call":
        ok = call.excinfo is None
        entry["ok"] &= ok
        for name, value in item.user_properties:
            if name == "detail":
                entry["details"].append(value)
        if not ok:
            entry["details"].append(f"{item.name} failed")
    elif call.excinfo is not None:
        entry["ok"] = False
        entry["details"].append(f"{item.name} errored during {call.when}")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_CRITERIA, key=lambda c: int(c[2:])):
        e = _CRITERIA[cid]
        status = "PASS" if e["ok"] else "FAIL"
        terminalreporter.write_line(f"{cid} {status}: {e['text']}")
        for d in e["details"]:
            terminalreporter.write_line(f"    {d}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
