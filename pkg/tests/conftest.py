import sys
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lhcompress import Ensemble, SharedSeed
from lhcompress.ensemble import blind_example_ensemble

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture
def blind():
    return blind_example_ensemble(exact=True)


@pytest.fixture
def blind_float():
    return blind_example_ensemble(exact=False)


@pytest.fixture
def seed():
    return SharedSeed.from_hex("0123456789abcdef" * 4, "tests")


def random_ensemble(rng, d=None, L=None, exact=False, denom=12):
    """Random ensemble; exact ones use rationals with a small common denominator."""
    d = d or int(rng.integers(2, 4))
    L = L or int(rng.integers(1, 4))
    if exact:
        def vec(n):
            cuts = np.sort(rng.integers(0, denom + 1, size=n - 1))
            parts = np.diff(np.concatenate([[0], cuts, [denom]]))
            return tuple(Fraction(int(v), denom) for v in parts)
        weights = vec(L)
        while any(w == 0 for w in weights):
            weights = vec(L)
        return Ensemble(weights, tuple(vec(d) for _ in range(L)))
    weights = tuple(rng.dirichlet(np.ones(L)))
    states = tuple(tuple(rng.dirichlet(np.ones(d) * 0.7)) for _ in range(L))
    return Ensemble(weights, states)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS):
            terminalreporter.write_line(line)
