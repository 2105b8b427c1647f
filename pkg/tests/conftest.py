import random

import pytest

from ppsnd.phe import PaillierKeyPair, keygen

# n = 251 * 241 = 60491 < 2**16
TOY_P, TOY_Q = 251, 241


@pytest.fixture(scope="session")
def toy_keys():
    return PaillierKeyPair.from_primes(TOY_P, TOY_Q)


@pytest.fixture(scope="session")
def keys_1024():
    return keygen(1024, random.Random("fixture/1024"))


@pytest.fixture
def rng(request):
    return random.Random(f"test/{request.node.name}")


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance_report(request):
    """Record a PASS/FAIL line for the terminal summary and return the recorder."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(line: str) -> None:
        lines.append(line)
        print(line)
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
