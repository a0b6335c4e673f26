import pytest

ACCEPTANCE_LINES = []


def record(number, passed, detail):
    line = f"[criterion {number:>2}] {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append((number, line))
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def limit_sources():
    """rho_{m+1,1} by Monte Carlo (1e5 matrices) for the large-m checks, built once."""
    from critlab.limit_law import correlation_source

    return {m: correlation_source(m, 100_000, seed=1000 + m, exact=False) for m in (4, 8, 16, 32, 64)}
