"""Shared fixtures: the Fig-1-style cause structure dataset used across suites,
plus pass/fail reporting for the acceptance criteria."""

import pytest

from covermine.model import Dataset, Feature, Record

ACCEPTANCE_RESULTS: dict = {}


def criterion(label: str):
    """Tags an acceptance test so its verdict is printed per criterion."""
    def mark(fn):
        fn._criterion = label
        return fn
    return mark


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    label = getattr(getattr(item, "function", None), "_criterion", None)
    if label and rep.when == "call":
        ACCEPTANCE_RESULTS[label] = "PASS" if rep.passed else "FAIL"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for label in sorted(ACCEPTANCE_RESULTS):
            terminalreporter.write_line(f"{ACCEPTANCE_RESULTS[label]}  {label}")

LANG = Feature("lang", "nominal")
SIZE = Feature("size", "numeric")


def fig1_dataset() -> Dataset:
    """Five records, two causes: I1->{C1}, I2->{C1,C2}, I3->{C2}, I4->{C2}, I5->{}.

    Selecting I2 alone covers both causes; I1+I3 also covers both but costs
    two selections.  Feature values are a fixture invention, the cause-link
    structure is what matters.
    """
    records = [
        Record("I1", {"lang": "java", "size": 10.0}, frozenset({"C1"})),
        Record("I2", {"lang": "java", "size": 3.0}, frozenset({"C1", "C2"})),
        Record("I3", {"lang": "python", "size": 6.0}, frozenset({"C2"})),
        Record("I4", {"lang": "go", "size": 2.0}, frozenset({"C2"})),
        Record("I5", {"lang": "java", "size": 9.0}, frozenset()),
    ]
    return Dataset([LANG, SIZE], records)


@pytest.fixture
def fig1() -> Dataset:
    return fig1_dataset()
