import numpy as np
import pytest

from burr.bench import synthetic_keys
from burr.hashing import fingerprints, hash_keys


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def hashed_pairs(n, seed=0, r=8):
    """Master hashes of ``n`` synthetic keys with their r-bit fingerprints as values."""
    h = hash_keys(synthetic_keys(n, seed), seed)
    return h, fingerprints(h, r)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(results):
        terminalreporter.write_line(mod._line(num))
