import numpy as np
import pytest


def planted_factorization(k, seed, n=100, m=60, noise=0.02):
    """Data with ``k`` well separated non-negative components.

    Each component owns a disjoint block of features, each sample is
    dominated by one component.
    """
    rng = np.random.default_rng(seed)
    H = np.zeros((k, m))
    for j, block in enumerate(np.array_split(np.arange(m), k)):
        H[j, block] = rng.uniform(0.5, 1.5, block.size)
    H += 0.05 * rng.random((k, m))
    W = np.zeros((n, k))
    dominant = rng.integers(0, k, n)
    W[np.arange(n), dominant] = rng.uniform(0.5, 1.5, n)
    W += 0.05 * rng.random((n, k))
    return W @ H + noise * rng.random((n, m))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Record one acceptance line; returns ``check(name, ok, detail, elapsed, limit)``."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def check(name, ok, detail, elapsed, limit):
        ok = bool(ok) and elapsed < limit
        line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail} [{elapsed:.1f}s / {limit:.0f}s]"
        lines.append(line)
        print(line)
        assert ok, line

    return check


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
