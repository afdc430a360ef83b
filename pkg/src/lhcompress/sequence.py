"""Label sequences, their block structure, and per-block target counts.

Labels and positions are zero-based: a sequence of ``N`` systems is a tuple of
state indices in ``range(L)``, and block ``k`` lists the positions where
state ``k`` occurs.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Sequence

from .combinatorics import sample_binomial
from .ensemble import Ensemble

TargetCounts = tuple  # tuple over blocks of per-symbol count tuples


@dataclass(frozen=True)
class SequenceSpec:
    labels: tuple
    n_states: int

    def __post_init__(self):
        labels = tuple(int(k) for k in self.labels)
        for k in labels:
            if not (0 <= k < self.n_states):
                raise ValueError(f"label {k} outside range(0, {self.n_states})")
        object.__setattr__(self, "labels", labels)

    @property
    def N(self) -> int:
        return len(self.labels)

    @cached_property
    def positions(self) -> tuple[tuple[int, ...], ...]:
        blocks = [[] for _ in range(self.n_states)]
        for i, k in enumerate(self.labels):
            blocks[k].append(i)
        return tuple(tuple(b) for b in blocks)

    @cached_property
    def counts(self) -> tuple[int, ...]:
        return tuple(len(b) for b in self.positions)

    @classmethod
    def contiguous(cls, counts: Sequence[int]) -> "SequenceSpec":
        """Runs of state 0, then state 1, and so on, with the given lengths."""
        labels = []
        for k, n in enumerate(counts):
            labels.extend([k] * n)
        return cls(tuple(labels), len(counts))


def block_structure(labels: Sequence[int], n_states: int | None = None) -> SequenceSpec:
    if n_states is None:
        n_states = max(labels) + 1 if len(labels) else 1
    return SequenceSpec(tuple(labels), n_states)


def check_target_counts(spec: SequenceSpec, x: TargetCounts, d: int) -> None:
    if len(x) != spec.n_states:
        raise ValueError(f"target counts cover {len(x)} blocks, sequence has {spec.n_states}")
    for n_k, x_k in zip(spec.counts, x):
        if len(x_k) != d or sum(x_k) != n_k or any(c < 0 for c in x_k):
            raise ValueError(f"target counts {x_k} inconsistent with block size {n_k}")


def block_counts(spec: SequenceSpec, string: Sequence[int], d: int) -> TargetCounts:
    """Per-block symbol counts of a concrete string."""
    out = []
    for pos in spec.positions:
        c = [0] * d
        for i in pos:
            c[int(string[i])] += 1
        out.append(tuple(c))
    return tuple(out)


def mixture_weights(spec: SequenceSpec, ensemble: Ensemble) -> tuple:
    """Symbol weights ``P_j = sum_k n_k lambda_j^k / N`` for this sequence.

    These use the sequence's actual block sizes, not the source averages.
    """
    if spec.n_states != ensemble.L:
        raise ValueError("sequence and ensemble disagree on the number of states")
    if spec.N == 0:
        raise ValueError("empty sequence")
    return _mixture(spec.counts, ensemble)


@lru_cache(maxsize=4096)
def _mixture(counts: tuple[int, ...], ensemble: Ensemble) -> tuple:
    N = Fraction(sum(counts)) if ensemble.exact else sum(counts)
    out = []
    for j in range(ensemble.d):
        acc = 0
        for n_k, state in zip(counts, ensemble.states):
            acc += n_k * state.eigenvalues[j]
        out.append(acc / N)
    return tuple(out)


def sample_target_counts(spec: SequenceSpec, ensemble: Ensemble, stream) -> TargetCounts:
    """Independent multinomial counts per block, as a chain of binomials.

    Symbols are drawn from ``d-1`` down to ``1`` and symbol 0 takes the
    remainder, so for qubits the single draw is the number of ones. Each
    block consumes exactly ``d-1`` stream words.
    """
    d = ensemble.d
    out = []
    for n_k, state in zip(spec.counts, ensemble.states):
        lam = state.eigenvalues
        counts = [0] * d
        left = n_k
        for j in range(d - 1, 0, -1):
            mass = sum(lam[: j + 1])
            p = float(lam[j] / mass) if mass > 0 else 0.0
            c = sample_binomial(left, min(p, 1.0), stream)
            counts[j] = c
            left -= c
        counts[0] = left
        out.append(tuple(counts))
    return tuple(out)
