"""Exact error, fidelity and rate analysis of the shared-codebook protocol.

Distributions over basis strings are kept in count-class form: every string
whose per-block symbol counts equal ``x`` has the same probability, so a
table keyed by ``x`` (plus a uniform background weight for the error state)
describes the whole ``d**N`` distribution in polynomial space.

Ensembles built from :class:`~fractions.Fraction` values are analysed in
exact rational arithmetic; float ensembles use base-2 log-domain products.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from operator import mul
from typing import Iterator, Mapping, Sequence

import numpy as np

from .combinatorics import (
    DEFAULT_ETA,
    NEG_INF,
    composition_count,
    compositions,
    log2_multinomial,
    log2_multinomial_pmf,
    multinomial,
    multinomial_pmf_exact,
    window,
)
from .ensemble import Ensemble, is_exact, levitin_holevo
from .sequence import (
    SequenceSpec,
    TargetCounts,
    block_counts,
    check_target_counts,
    mixture_weights,
)

DEFAULT_BUDGET = 10**7
EXACT_S_LIMIT = 10**6
INT_SIZE_LIMIT_LOG2 = 63
LN2 = math.log(2.0)


class BudgetExceededError(RuntimeError):
    """An exact sum would visit more count classes than the budget allows.

    Callers should fall back to a Monte Carlo estimate.
    """

    def __init__(self, needed: int, budget: int):
        super().__init__(
            f"exact evaluation needs {needed} count classes (budget {budget}); "
            "use a Monte Carlo estimate instead"
        )
        self.needed = needed
        self.budget = budget


@dataclass(frozen=True)
class CodebookSize:
    """Codebook size ``S``, exact when it fits in 63 bits, else by its log2."""

    log2: float
    value: int | None = None

    def __post_init__(self):
        if self.value is not None and self.value < 1:
            raise ValueError("codebook size must be at least 1")
        if self.log2 < 0:
            raise ValueError("codebook size must be at least 1")

    @classmethod
    def from_int(cls, value: int) -> "CodebookSize":
        value = int(value)
        if value < 1:
            raise ValueError("codebook size must be at least 1")
        return cls(math.log2(value), value)

    @classmethod
    def from_log2(cls, log2: float) -> "CodebookSize":
        """Rounds ``2**log2`` up to an integer whenever that fits in 63 bits."""
        log2 = max(float(log2), 0.0)
        if log2 <= INT_SIZE_LIMIT_LOG2:
            return cls.from_int(max(1, math.ceil(2.0**log2)))
        return cls(log2)

    @classmethod
    def unbounded(cls) -> "CodebookSize":
        """The ``S -> infinity`` limit: every reachable target is matched."""
        return cls(math.inf)

    @property
    def index_width(self) -> int:
        """Bits for an index in ``0..S``: integer part of ``log2(S+1) + 1``."""
        if math.isinf(self.log2):
            raise ValueError("an unbounded codebook has no finite index width")
        if self.value is not None:
            return (self.value + 1).bit_length()
        return math.floor(self.log2) + 1


def as_size(S) -> CodebookSize:
    if isinstance(S, CodebookSize):
        return S
    if isinstance(S, (int, np.integer)):
        return CodebookSize.from_int(int(S))
    raise TypeError(f"codebook size must be an int or CodebookSize, not {type(S).__name__}")


# ---------------------------------------------------------------------------
# match and error probabilities


def match_probability(spec: SequenceSpec, x: TargetCounts, weights, method: str = "blocks"):
    """Probability that one codebook string has exactly counts ``x`` in every block.

    ``method="blocks"`` multiplies per-block multinomial factors;
    ``method="total"`` multiplies the pmf of the overall symbol counts by the
    probability that those symbols land in the right blocks. Both agree.
    """
    d = len(weights)
    check_target_counts(spec, x, d)
    exact = is_exact(weights)
    if method == "blocks":
        if exact:
            return reduce(
                mul,
                (multinomial_pmf_exact(n_k, x_k, weights) for n_k, x_k in zip(spec.counts, x)),
                Fraction(1),
            )
        acc = 0.0
        for n_k, x_k in zip(spec.counts, x):
            acc += log2_multinomial_pmf(n_k, x_k, weights)
            if acc == NEG_INF:
                return 0.0
        return 2.0**acc
    if method == "total":
        N = spec.N
        totals = tuple(sum(x_k[j] for x_k in x) for j in range(d))
        if exact:
            q = multinomial_pmf_exact(N, totals, weights)
            ratio = Fraction(
                reduce(mul, (multinomial(n_k, x_k) for n_k, x_k in zip(spec.counts, x)), 1),
                multinomial(N, totals),
            )
            return q * ratio
        log_q = log2_multinomial_pmf(N, totals, weights)
        if log_q == NEG_INF:
            return 0.0
        log_ratio = math.fsum(
            log2_multinomial(n_k, x_k) for n_k, x_k in zip(spec.counts, x)
        ) - log2_multinomial(N, totals)
        return 2.0 ** (log_q + log_ratio)
    raise ValueError(f"unknown method {method!r}")


def error_probability(R, S):
    """``(1 - R)**S``, the chance that no codebook string matches.

    Exact for rational ``R`` and integer ``S`` up to 10**6; otherwise
    evaluated as ``exp(-exp(ln S + ln(-log1p(-R))))`` so huge ``S`` is safe.
    """
    size = as_size(S)
    if math.isinf(size.log2):
        if not (0 <= R <= 1):
            raise ValueError("R must be a probability")
        zero, one = (Fraction(0), Fraction(1)) if isinstance(R, Fraction) else (0.0, 1.0)
        return zero if R > 0 else one
    if isinstance(R, Fraction) and size.value is not None and size.value <= EXACT_S_LIMIT:
        if not (0 <= R <= 1):
            raise ValueError("R must be a probability")
        return (1 - R) ** size.value
    R = float(R)
    if not (0.0 <= R <= 1.0):
        raise ValueError("R must be a probability")
    if R == 0.0:
        return 1.0
    if R == 1.0:
        return 0.0
    t = size.log2 * LN2 + math.log(-math.log1p(-R))
    if t > 709.0:
        return 0.0
    return math.exp(-math.exp(t))


# ---------------------------------------------------------------------------
# count-class enumeration


def _block_classes(n_k: int, lam, exact: bool) -> list[tuple[tuple, object]]:
    """Positive-probability count vectors of one block with their probabilities."""
    out = []
    for x_k in compositions(n_k, len(lam)):
        if exact:
            p = multinomial_pmf_exact(n_k, x_k, lam)
            if p > 0:
                out.append((x_k, p))
        else:
            lp = log2_multinomial_pmf(n_k, x_k, lam)
            if lp != NEG_INF:
                out.append((x_k, lp))
    return out


def _check_budget(needed: int, budget: int) -> None:
    if needed > budget:
        raise BudgetExceededError(needed, budget)


def target_count_classes(
    spec: SequenceSpec, ensemble: Ensemble, budget: int = DEFAULT_BUDGET
) -> Iterator[tuple[TargetCounts, object]]:
    """Yield ``(x, P(x))`` over all target counts with positive probability."""
    if spec.n_states != ensemble.L:
        raise ValueError("sequence and ensemble disagree on the number of states")
    exact = ensemble.exact
    _check_budget(
        reduce(mul, (composition_count(n_k, ensemble.d) for n_k in spec.counts), 1), budget
    )
    per_block = [
        _block_classes(n_k, s.eigenvalues, exact) for n_k, s in zip(spec.counts, ensemble.states)
    ]
    for combo in itertools.product(*per_block):
        x = tuple(c[0] for c in combo)
        if exact:
            yield x, reduce(mul, (c[1] for c in combo), Fraction(1))
        else:
            yield x, 2.0 ** math.fsum(c[1] for c in combo)


def class_size(spec: SequenceSpec, x: TargetCounts) -> int:
    return reduce(mul, (multinomial(n_k, x_k) for n_k, x_k in zip(spec.counts, x)), 1)


def _all_classes(spec: SequenceSpec, d: int) -> Iterator[TargetCounts]:
    return itertools.product(*(compositions(n_k, d) for n_k in spec.counts))


# ---------------------------------------------------------------------------
# reports


@dataclass
class ErrorReport:
    """Exact error statistics for one sequence (or one count vector)."""

    N: int
    S: CodebookSize
    class_probability: dict = field(repr=False)
    class_error: dict = field(repr=False)
    sequence_error: object = 0

    def recheck(self):
        return sum(self.class_probability[x] * self.class_error[x] for x in self.class_probability)


@dataclass(frozen=True)
class RateReport:
    N: int
    total_bits: int
    levitin_holevo: float
    overhead_bits: int = 0

    @property
    def bits_per_signal(self) -> float:
        return self.total_bits / self.N

    @property
    def f_N(self) -> float:
        return self.bits_per_signal - self.levitin_holevo


def rate_report(N: int, message_bits: int, ensemble: Ensemble, with_basis_overhead: bool = False) -> RateReport:
    overhead = basis_overhead(N, ensemble.d) if with_basis_overhead else 0
    return RateReport(N, message_bits + overhead, levitin_holevo(ensemble), overhead)


def error_report(spec: SequenceSpec, ensemble: Ensemble, S, budget: int = DEFAULT_BUDGET) -> ErrorReport:
    size = as_size(S)
    weights = mixture_weights(spec, ensemble)
    probs, errors = {}, {}
    for x, px in target_count_classes(spec, ensemble, budget):
        probs[x] = px
        errors[x] = error_probability(match_probability(spec, x, weights), size)
    total = sum(probs[x] * errors[x] for x in probs)
    return ErrorReport(spec.N, size, probs, errors, total)


def sequence_error(spec: SequenceSpec, ensemble: Ensemble, S, budget: int = DEFAULT_BUDGET):
    """``E_K = sum_x P(x) (1 - R(x))**S`` for the given label sequence."""
    return error_report(spec, ensemble, S, budget).sequence_error


def count_vector_probability(N: int, counts: Sequence[int], ensemble: Ensemble):
    if ensemble.exact:
        return multinomial_pmf_exact(N, counts, ensemble.weights)
    return 2.0 ** log2_multinomial_pmf(N, counts, ensemble.weights)


def count_vectors(N: int, ensemble: Ensemble) -> Iterator[tuple[tuple[int, ...], object]]:
    """Yield ``(n, P_n)`` over block-size vectors with positive probability."""
    for n in compositions(N, ensemble.L):
        p = count_vector_probability(N, n, ensemble)
        if p > 0:
            yield n, p


def _classes_needed(N: int, ensemble: Ensemble) -> int:
    return sum(
        reduce(mul, (composition_count(n_k, ensemble.d) for n_k in n), 1)
        for n in compositions(N, ensemble.L)
    )


def average_error(N: int, ensemble: Ensemble, S, budget: int = DEFAULT_BUDGET):
    """Source-averaged error ``E = sum_n P_n E_n``.

    The error of a sequence depends only on its block sizes, so each size
    vector is evaluated once on a contiguous representative.
    """
    _check_budget(_classes_needed(N, ensemble), budget)
    size = as_size(S)
    terms = [
        p * sequence_error(SequenceSpec.contiguous(n), ensemble, size, budget)
        for n, p in count_vectors(N, ensemble)
    ]
    if ensemble.exact and all(isinstance(t, Fraction) for t in terms):
        return sum(terms, Fraction(0))
    return math.fsum(float(t) for t in terms)


def windowed_max_error(
    N: int, ensemble: Ensemble, S, eta: float = DEFAULT_ETA, budget: int = DEFAULT_BUDGET
) -> float:
    """Largest ``E_n`` over block sizes inside every state's concentration window."""
    size = as_size(S)
    bounds = [window(N, float(p), eta) for p in ensemble.weights]
    worst = 0.0
    for n in compositions(N, ensemble.L):
        if all(lo <= n_k <= hi for n_k, (lo, hi) in zip(n, bounds)):
            e = float(sequence_error(SequenceSpec.contiguous(n), ensemble, size, budget))
            worst = max(worst, e)
    return worst


# ---------------------------------------------------------------------------
# distributions over basis strings


@dataclass(frozen=True)
class DiagonalDistribution:
    """Probability over ``d**N`` basis strings in count-class form.

    ``classes[x]`` is the total probability of the strings with per-block
    counts ``x`` (spread uniformly over them); ``background`` is spread
    uniformly over all ``d**N`` strings.
    """

    spec: SequenceSpec
    d: int
    classes: Mapping
    background: object = 0

    def total(self):
        return sum(self.classes.values()) + self.background

    @property
    def exact(self) -> bool:
        return is_exact(self.classes.values()) and is_exact([self.background])

    def string_probability(self, string: Sequence[int]):
        x = block_counts(self.spec, string, self.d)
        share = self.classes.get(x, 0)
        if self.exact:
            return Fraction(share) / class_size(self.spec, x) + Fraction(self.background) / self.d**self.spec.N
        return float(share) / class_size(self.spec, x) + float(self.background) / self.d**self.spec.N

    def strings(self) -> Iterator[tuple[int, ...]]:
        return itertools.product(range(self.d), repeat=self.spec.N)

    def to_dense(self) -> np.ndarray:
        """Per-string probabilities, lexicographic order with position 0 most significant."""
        if self.spec.N > 20:
            raise ValueError("dense expansion is limited to N <= 20")
        return np.array([float(self.string_probability(s)) for s in self.strings()])


def alice_distribution(spec: SequenceSpec, ensemble: Ensemble, budget: int = DEFAULT_BUDGET) -> DiagonalDistribution:
    """The product state of the sequence, grouped by count class."""
    classes = dict(target_count_classes(spec, ensemble, budget))
    zero = Fraction(0) if ensemble.exact else 0.0
    return DiagonalDistribution(spec, ensemble.d, classes, zero)


def bob_distribution(spec: SequenceSpec, ensemble: Ensemble, S, budget: int = DEFAULT_BUDGET) -> DiagonalDistribution:
    """Decoder output: class ``x`` kept with weight ``P(x)(1-E(x))``, the rest uniform."""
    report = error_report(spec, ensemble, S, budget)
    classes = {}
    background = Fraction(0) if ensemble.exact else 0.0
    for x, px in report.class_probability.items():
        e = report.class_error[x]
        if isinstance(px, Fraction) and not isinstance(e, Fraction):
            px = float(px)
            background = float(background)
        classes[x] = px * (1 - e)
        background += px * e
    return DiagonalDistribution(spec, ensemble.d, classes, background)


def _log2(v) -> float:
    if v <= 0:
        return NEG_INF
    if isinstance(v, Fraction):
        # big-int logs, so tiny rationals do not underflow through float
        return math.log2(v.numerator) - math.log2(v.denominator)
    return math.log2(v)


def _log2_add(a: float, b: float) -> float:
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    hi, lo = max(a, b), min(a, b)
    return hi + math.log2(1.0 + 2.0 ** (lo - hi))


def fidelity(a: DiagonalDistribution, b: DiagonalDistribution, budget: int = DEFAULT_BUDGET) -> float:
    """Bhattacharyya overlap ``sum_m sqrt(p_m q_m)``, summed class by class."""
    if a.d != b.d or a.spec.positions != b.spec.positions:
        raise ValueError("distributions live on different block structures")
    spec, d, N = a.spec, a.d, a.spec.N
    if a.background == 0:
        candidates = list(a.classes)
    elif b.background == 0:
        candidates = list(b.classes)
    else:
        _check_budget(reduce(mul, (composition_count(n, d) for n in spec.counts), 1), budget)
        candidates = _all_classes(spec, d)
    log_uniform = -N * math.log2(d)
    bg_a = _log2(a.background) + log_uniform
    bg_b = _log2(b.background) + log_uniform
    terms = []
    for x in candidates:
        log_size = math.fsum(log2_multinomial(n_k, x_k) for n_k, x_k in zip(spec.counts, x))
        la = _log2_add(_log2(a.classes.get(x, 0)) - log_size, bg_a)
        lb = _log2_add(_log2(b.classes.get(x, 0)) - log_size, bg_b)
        if la == NEG_INF or lb == NEG_INF:
            continue
        terms.append(2.0 ** (log_size + 0.5 * (la + lb)))
    return min(max(math.fsum(terms), 0.0), 1.0)


def fidelity_lower_bound(E_K):
    """``1 - E_K``; the decoder's fidelity with the source state is at least this."""
    if not (0 <= E_K <= 1):
        raise ValueError("E_K must be a probability")
    return 1 - E_K


def average_fidelity(N: int, ensemble: Ensemble, S, budget: int = DEFAULT_BUDGET) -> float:
    """``sum_n P_n F(alice_n, bob_n)`` grouped by block-size vector."""
    _check_budget(_classes_needed(N, ensemble), budget)
    size = as_size(S)
    terms = []
    for n, p in count_vectors(N, ensemble):
        spec = SequenceSpec.contiguous(n)
        terms.append(
            float(p) * fidelity(alice_distribution(spec, ensemble, budget), bob_distribution(spec, ensemble, size, budget), budget)
        )
    return math.fsum(terms)


# ---------------------------------------------------------------------------
# typical-sequence rate heuristic


def round_to_total(values: Sequence[float], total: int) -> tuple[int, ...]:
    """Round to integers summing to ``total`` (largest remainder, ties to lower index)."""
    floors = [math.floor(v) for v in values]
    short = total - sum(floors)
    order = sorted(range(len(values)), key=lambda i: (-(values[i] - floors[i]), i))
    for i in order[: max(short, 0)]:
        floors[i] += 1
    return tuple(floors)


@dataclass(frozen=True)
class TypicalMatch:
    N: int
    log2_p: float
    typical_counts: tuple
    target_counts: tuple

    @property
    def bits_per_signal(self) -> float:
        return -self.log2_p / self.N


def typical_match_probability(ensemble: Ensemble, N: int) -> TypicalMatch:
    """Chance that a string drawn from the average state is typical for a typical sequence.

    Typical block sizes ``N p_k`` and per-block counts ``n_k lambda_j^k`` are
    rounded to integers preserving their totals; the denominator uses the
    resulting overall symbol counts so the ratio is a probability.
    """
    n_bar = round_to_total([N * float(p) for p in ensemble.weights], N)
    x = tuple(
        round_to_total([n_k * float(v) for v in s.eigenvalues], n_k)
        for n_k, s in zip(n_bar, ensemble.states)
    )
    totals = tuple(sum(x_k[j] for x_k in x) for j in range(ensemble.d))
    log2_p = math.fsum(log2_multinomial(n_k, x_k) for n_k, x_k in zip(n_bar, x)) - log2_multinomial(N, totals)
    return TypicalMatch(N, min(log2_p, 0.0), n_bar, x)


# ---------------------------------------------------------------------------
# blind-scenario counterexample and basis overhead


@dataclass(frozen=True)
class BlindReport:
    N: int
    flip_error: Fraction
    q: int
    g: int

    @property
    def rate_bits_per_signal(self) -> float:
        return math.log2(self.g) / self.N


def blind_counterexample(N: int) -> BlindReport:
    """Counting behind the blind lower bound for ``{(1/2,|1><1|), (1/2, 1/2)}``.

    ``flip_error`` is the fraction of the ``q`` sequences compatible with a
    typical string that a two-position flip ruins; ``g`` counts the typical
    strings.
    """
    if N < 4 or N % 4:
        raise ValueError("N must be a positive multiple of 4")
    ones, rho1 = 3 * N // 4, N // 2
    q = math.comb(ones, rho1)
    flip = Fraction(math.comb(ones - 1, rho1 - 1), q)
    g = math.comb(N, ones)
    return BlindReport(N, flip, q, g)


def basis_overhead(N: int, d: int) -> int:
    """Bits to ship ``N`` copies of each of ``d`` eigenvectors via the symmetric subspace."""
    if N < 1:
        raise ValueError("N must be at least 1")
    return d * ((N + 1).bit_length() - 1)
