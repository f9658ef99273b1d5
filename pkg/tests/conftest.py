import pytest

from mixgm.data import Variable, VariableSchema
from mixgm.simulate import synthetic_schema


@pytest.fixture
def small_schema():
    return synthetic_schema(3, 2, [2, 3])


@pytest.fixture
def mixed_schema():
    return VariableSchema((
        Variable("age", "continuous", category="demographic"),
        Variable("uacr", "continuous", log2=True, category="clinical"),
        Variable("sex", "discrete", ("f", "m"), "f", category="demographic"),
        Variable("stage", "discrete", ("1", "2", "3"), "2", category="clinical"),
    ))


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[k])
