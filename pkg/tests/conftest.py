import pytest

CRITERIA = {
    1: "transform correctness",
    2: "Montgomery correctness",
    3: "prime enumeration",
    4: "multiplier counting",
    5: "memory accountant",
    6: "precision sweep",
    7: "CKKS roundtrip",
    8: "simulator knee",
    9: "EMA ablation",
    10: "streaming equivalence",
}

_results: dict[int, list] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n = mark.args[0]
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        _results.setdefault(n, []).append((item.name, rep.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n, name in CRITERIA.items():
        runs = _results.get(n)
        if not runs:
            continue
        ok = all(o == "passed" for _, o in runs)
        failed = [t for t, o in runs if o != "passed"]
        line = f"criterion {n:2d} {name:24s} {'PASS' if ok else 'FAIL'}"
        if failed:
            line += "  (" + ", ".join(failed) + ")"
        tr.write_line(line)
