import pytest

from xrerank.data import FixtureSpec, write_fixture

# filled by the acceptance suite: (criterion, passed, detail)
ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []

SMALL_FIXTURE = FixtureSpec(n_users=40, n_products=150, seed=3)


@pytest.fixture(scope="session")
def small_fixture(tmp_path_factory):
    """Paths of a small synthetic dataset (shared, do not modify)."""
    return write_fixture(tmp_path_factory.mktemp("small"), SMALL_FIXTURE)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
