import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture
def cache_dir(tmp_path):
    return tmp_path / "cache"


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
