import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

import oracles
from lhcompress.combinatorics import (
    binomial_pmf,
    binomial_pmf_exact,
    composition_count,
    compositions,
    concentration_window_mass,
    gaussian_lower_bound,
    gaussian_lower_bound_holds,
    log2_multinomial,
    log2_multinomial_pmf,
    multinomial,
    multinomial_pmf_exact,
    sample_binomial,
    window,
)
from lhcompress.shared_randomness import SharedSeed, derive_stream


def test_multinomial_small_case():
    assert multinomial(6, (2, 2, 2)) == 90
    assert log2_multinomial(6, (2, 2, 2)) == pytest.approx(math.log2(90), abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 400), min_size=1, max_size=4))
def test_log2_multinomial_matches_factorials(parts):
    n = sum(parts)
    exact = math.log2(oracles.multinomial(n, parts))
    assert log2_multinomial(n, parts) == pytest.approx(exact, rel=1e-12, abs=1e-12)


def test_log2_multinomial_large_n_uses_lgamma():
    parts = (3000, 2000, 5000)
    exact = math.log2(oracles.multinomial(10000, parts))
    assert log2_multinomial(10000, parts) == pytest.approx(exact, rel=1e-12)


def test_parts_must_sum_to_n():
    with pytest.raises(ValueError):
        multinomial(5, (2, 2))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 60), st.fractions(0, 1, max_denominator=20))
def test_binomial_exact_matches_oracle(n, p):
    for y in range(n + 1):
        assert binomial_pmf_exact(n, p, y) == oracles.binomial_pmf(n, p, y)


@pytest.mark.parametrize("n, p", [(10, 0.3), (200, 0.2), (1000, 0.9), (50, 0.0), (50, 1.0)])
def test_binomial_pmf_against_scipy(n, p):
    ours = np.array([binomial_pmf(n, p, y) for y in range(n + 1)])
    ref = stats.binom.pmf(np.arange(n + 1), n, p)
    assert np.allclose(ours, ref, rtol=1e-10, atol=1e-300)
    assert math.fsum(ours) == pytest.approx(1.0, abs=1e-12)


def test_multinomial_pmf_log_and_exact_agree():
    probs = (Fraction(1, 6), Fraction(1, 3), Fraction(1, 2))
    total = Fraction(0)
    for c in compositions(7, 3):
        e = multinomial_pmf_exact(7, c, probs)
        total += e
        assert 2.0 ** log2_multinomial_pmf(7, c, [float(p) for p in probs]) == pytest.approx(float(e), rel=1e-12)
    assert total == 1


def test_zero_probability_symbol():
    assert log2_multinomial_pmf(3, (0, 3), (0.0, 1.0)) == 0.0
    assert log2_multinomial_pmf(3, (1, 2), (0.0, 1.0)) == -math.inf


@pytest.mark.parametrize("n, d", [(0, 2), (5, 2), (4, 3), (6, 4)])
def test_compositions(n, d):
    got = list(compositions(n, d))
    assert got == sorted(got)
    assert len(got) == len(set(got)) == composition_count(n, d) == math.comb(n + d - 1, d - 1)
    assert all(sum(c) == n and len(c) == d for c in got)


def test_window_clipping():
    lo, hi = window(100, 0.5, 0.1)
    assert (lo, hi) == (int(50 - 100**0.6), int(50 + 100**0.6))
    assert window(10, 0.05, 0.1)[0] == 0
    assert window(10, 0.95, 0.1)[1] == 10


def test_window_mass_against_scipy():
    lo, hi = window(1000, 0.3)
    ref = stats.binom.cdf(hi, 1000, 0.3) - stats.binom.cdf(lo - 1, 1000, 0.3)
    assert concentration_window_mass(1000, 0.3) == pytest.approx(ref, rel=1e-10)


def test_gaussian_bound_value_and_window_check():
    n, p, y = 100, 0.5, 50
    assert gaussian_lower_bound(n, p, y) == pytest.approx(0.5 / math.sqrt(2 * math.pi * 25))
    assert gaussian_lower_bound_holds(n, p, 50)
    lo, hi = window(n, p)
    assert gaussian_lower_bound_holds(n, p, hi) in (True, False)
    with pytest.raises(ValueError):
        gaussian_lower_bound_holds(n, p, hi + 1)
    with pytest.raises(ValueError):
        gaussian_lower_bound_holds(n, 1.0, 50)


def test_sample_binomial_distribution():
    seed = SharedSeed.from_hex("ab" * 32)
    stream = derive_stream(seed, "test-binomial", 0)
    n, p, trials = 20, 0.35, 20000
    draws = np.array([sample_binomial(n, p, stream) for _ in range(trials)])
    assert stream.position == trials
    observed = np.bincount(draws, minlength=n + 1)
    expected = stats.binom.pmf(np.arange(n + 1), n, p) * trials
    keep = expected > 5
    chi2 = ((observed[keep] - expected[keep]) ** 2 / expected[keep]).sum()
    assert stats.chi2.sf(chi2, keep.sum() - 1) > 1e-4


def test_sample_binomial_degenerate():
    stream = derive_stream(SharedSeed.from_hex("cd" * 32), "t", 0)
    assert sample_binomial(7, 0.0, stream) == 0
    assert sample_binomial(7, 1.0, stream) == 7
    assert sample_binomial(0, 0.4, stream) == 0
    assert stream.position == 3
