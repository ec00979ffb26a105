import pytest

from sagnacsim.jsa import chip_jsa


@pytest.fixture(scope="session")
def chip1_jsa():
    return chip_jsa()


@pytest.fixture(scope="session")
def unfiltered_jsa():
    return chip_jsa(filtered=False)


@pytest.fixture(scope="session")
def small_jsa():
    # coarse unfiltered spectrum for cheap structural tests
    return chip_jsa(n=64, filtered=False)


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def report(number: int, ok: bool, detail: str):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        lines.append(line)
        print(line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
