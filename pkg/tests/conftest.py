import pytest

from helpers import allowed_mask, tiny_model

from msape.data import Triple, collate


@pytest.fixture
def allowed():
    return allowed_mask()


@pytest.fixture
def model(allowed):
    return tiny_model(allowed)


@pytest.fixture
def batch():
    return collate(
        [
            Triple((1, 5, 6, 2), (1, 7, 8, 9, 2), (1, 4, 10, 2)),
            Triple((1, 16, 2), (1, 11, 2), (1, 12, 13, 14, 2)),
        ]
    )


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS):
            terminalreporter.write_line(line)
