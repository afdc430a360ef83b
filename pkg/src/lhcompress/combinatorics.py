"""Binomial and multinomial machinery in log domain, plus exact rational forms.

Log probabilities are plain floats in base 2, with ``-inf`` for zero.
"""
from __future__ import annotations

import math
from functools import lru_cache
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

DEFAULT_ETA = 0.1
EXACT_LIMIT = 1024
LOG2E = 1.0 / math.log(2.0)
NEG_INF = float("-inf")


def multinomial(n: int, parts: Sequence[int]) -> int:
    """``n! / prod(parts_i!)`` as an exact integer."""
    if sum(parts) != n or any(p < 0 for p in parts):
        raise ValueError(f"parts {tuple(parts)} do not partition {n}")
    out, left = 1, n
    for p in parts:
        out *= math.comb(left, p)
        left -= p
    return out


def log2_multinomial(n: int, parts: Sequence[int]) -> float:
    """Base-2 log of the multinomial coefficient.

    Uses big-integer arithmetic up to ``n = 1024`` and log-gamma beyond.
    """
    if sum(parts) != n or any(p < 0 for p in parts):
        raise ValueError(f"parts {tuple(parts)} do not partition {n}")
    if n <= EXACT_LIMIT:
        return math.log2(multinomial(n, parts))
    acc = math.lgamma(n + 1) - math.fsum(math.lgamma(p + 1) for p in parts)
    return acc * LOG2E


def _log2_power(base, exponent: int) -> float:
    if exponent == 0:
        return 0.0
    if base <= 0:
        return NEG_INF
    return exponent * math.log2(base)


def log2_multinomial_pmf(n: int, counts: Sequence[int], probs: Sequence) -> float:
    """Base-2 log of ``multinomial(n; counts) * prod(probs_j ** counts_j)``."""
    acc = log2_multinomial(n, counts)
    for c, p in zip(counts, probs):
        acc += _log2_power(p, c)
        if acc == NEG_INF:
            break
    return acc


def multinomial_pmf_exact(n: int, counts: Sequence[int], probs: Sequence) -> Fraction:
    out = Fraction(multinomial(n, counts))
    for c, p in zip(counts, probs):
        out *= Fraction(p) ** c
    return out


def binomial_pmf(n: int, p: float, y: int) -> float:
    """``C(n, y) p^y (1-p)^(n-y)`` evaluated in log domain."""
    if not (0 <= y <= n):
        raise ValueError(f"y={y} outside [0, {n}]")
    if not (0 <= p <= 1):
        raise ValueError(f"p={p} is not a probability")
    return 2.0 ** log2_multinomial_pmf(n, (y, n - y), (p, 1 - p))


def binomial_pmf_exact(n: int, p, y: int) -> Fraction:
    return multinomial_pmf_exact(n, (y, n - y), (Fraction(p), 1 - Fraction(p)))


def compositions(n: int, d: int) -> Iterator[tuple[int, ...]]:
    """All length-``d`` nonnegative integer vectors summing to ``n``, in
    ascending lexicographic order."""
    if d == 1:
        yield (n,)
        return
    for first in range(n + 1):
        for rest in compositions(n - first, d - 1):
            yield (first,) + rest


def composition_count(n: int, d: int) -> int:
    return math.comb(n + d - 1, d - 1)


def window(n: int, p: float, eta: float = DEFAULT_ETA) -> tuple[int, int]:
    """Integer window ``[pn - n^(1/2+eta), pn + n^(1/2+eta)]`` clipped to ``[0, n]``.

    Endpoints take the integer part, truncating toward zero.
    """
    half = n ** (0.5 + eta)
    lo = int(p * n - half)
    hi = int(p * n + half)
    return max(lo, 0), min(hi, n)


def concentration_window_mass(n: int, p: float, eta: float = DEFAULT_ETA) -> float:
    if n < 1:
        raise ValueError("n must be at least 1")
    lo, hi = window(n, p, eta)
    if lo > hi:
        return 0.0
    return min(math.fsum(binomial_pmf(n, p, y) for y in range(lo, hi + 1)), 1.0)


def gaussian_lower_bound(n: int, p: float, y: int) -> float:
    """Right-hand side of the local Gaussian lower bound on ``Q_y``."""
    var = n * p * (1 - p)
    return 0.5 * math.exp(-((y - n * p) ** 2) / (2 * var)) / math.sqrt(2 * math.pi * var)


def gaussian_lower_bound_holds(n: int, p: float, y: int, eta: float = DEFAULT_ETA) -> bool:
    """Whether the exact pmf strictly exceeds the halved Gaussian density at ``y``.

    Only defined inside the concentration window.
    """
    if not (0 < p < 1):
        raise ValueError("p must lie strictly between 0 and 1")
    lo, hi = window(n, p, eta)
    if not (lo <= y <= hi):
        raise ValueError(f"y={y} outside the concentration window [{lo}, {hi}]")
    return binomial_pmf(n, p, y) > gaussian_lower_bound(n, p, y)


@lru_cache(maxsize=4096)
def _binomial_cdf_table(n: int, p: float) -> np.ndarray:
    logs = np.array([log2_multinomial_pmf(n, (y, n - y), (p, 1 - p)) for y in range(n + 1)])
    pmf = np.exp2(logs)
    cdf = np.cumsum(pmf)
    cdf /= cdf[-1]
    return cdf


def sample_binomial(n: int, p: float, stream) -> int:
    """One binomial draw by inverse CDF; consumes exactly one stream word."""
    u = stream.uniforms(1)[0]
    if p <= 0 or n == 0:
        return 0
    if p >= 1:
        return n
    cdf = _binomial_cdf_table(n, float(p))
    y = int(np.searchsorted(cdf, u, side="right"))
    return min(y, n)
