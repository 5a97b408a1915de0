from importlib import resources
from pathlib import Path

import pytest

from vfsim.formats import load_library, load_scenario

DATA = Path(str(resources.files("vfsim") / "data"))


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture
def library():
    # Fresh per test: validity records are mutable.
    return load_library(DATA / "library.toml")


@pytest.fixture
def scenario():
    def load(name):
        return load_scenario(DATA / f"{name}.toml")
    return load


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    mark = item.get_closest_marker("criterion")
    if mark is not None:
        outcome.get_result().user_properties.extend(
            [("criterion", mark.args[0]), ("title", mark.args[1])])


def pytest_terminal_summary(terminalreporter):
    verdicts, titles = {}, {}
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            props = dict(getattr(rep, "user_properties", ()))
            if "criterion" not in props or (outcome == "passed" and rep.when != "call"):
                continue
            num = props["criterion"]
            titles[num] = props.get("title", "")
            # A criterion spanning several tests passes only if all of them do.
            verdicts[num] = verdicts.get(num, True) and outcome == "passed"
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(verdicts):
        verdict = "PASS" if verdicts[num] else "FAIL"
        terminalreporter.write_line(f"criterion {num:>2}: {verdict}  {titles[num]}")
