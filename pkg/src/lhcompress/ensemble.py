"""Commuting mixed-state sources and their information quantities.

All states are diagonal in one shared basis, so a state is just its vector of
eigenvalues over the ``d`` basis symbols. Eigenvalues and weights may be
floats or :class:`fractions.Fraction`; exact inputs propagate through the
analysis routines as exact rationals.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Real
from pathlib import Path
from typing import Iterable, Sequence

TOL = 1e-12


class EnsembleError(ValueError):
    """Raised for malformed states or ensembles."""


def _parse_number(value) -> Real:
    if isinstance(value, str):
        return Fraction(value)
    if isinstance(value, bool) or not isinstance(value, Real):
        raise EnsembleError(f"not a real number: {value!r}")
    return value


def _normalized(values: Sequence[Real], what: str) -> tuple:
    values = tuple(_parse_number(v) for v in values)
    for v in values:
        if not (0 <= v <= 1):
            raise EnsembleError(f"{what} entry {v!r} outside [0, 1]")
    total = sum(values)
    if abs(total - 1) > TOL:
        raise EnsembleError(f"{what} sum to {float(total)!r}, not 1")
    if total != 1:
        values = tuple(v / total for v in values)
    return values


def is_exact(values: Iterable) -> bool:
    """True when every value is an int or Fraction (rational mode)."""
    return all(isinstance(v, (int, Fraction)) for v in values)


@dataclass(frozen=True)
class DiagonalState:
    """A density operator diagonal in the computational basis.

    ``eigenvalues[j]`` is the weight of basis symbol ``j``.
    """

    eigenvalues: tuple

    def __post_init__(self):
        if len(self.eigenvalues) < 2:
            raise EnsembleError("alphabet size d must be at least 2")
        object.__setattr__(
            self, "eigenvalues", _normalized(self.eigenvalues, "eigenvalues")
        )

    @property
    def d(self) -> int:
        return len(self.eigenvalues)

    @classmethod
    def qubit(cls, one_weight) -> "DiagonalState":
        """``lam |1><1| + (1 - lam) |0><0|``."""
        one_weight = _parse_number(one_weight)
        return cls((1 - one_weight, one_weight))


@dataclass(frozen=True)
class Ensemble:
    """A finite source emitting ``states[k]`` with probability ``weights[k]``."""

    weights: tuple
    states: tuple

    def __post_init__(self):
        states = tuple(
            s if isinstance(s, DiagonalState) else DiagonalState(tuple(s))
            for s in self.states
        )
        if not states:
            raise EnsembleError("an ensemble needs at least one state")
        if len(self.weights) != len(states):
            raise EnsembleError(
                f"{len(self.weights)} weights for {len(states)} states"
            )
        if len({s.d for s in states}) != 1:
            raise EnsembleError("all states must share the same alphabet size")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "weights", _normalized(self.weights, "weights"))

    @property
    def d(self) -> int:
        return self.states[0].d

    @property
    def L(self) -> int:
        return len(self.states)

    @property
    def exact(self) -> bool:
        return is_exact(self.weights) and all(
            is_exact(s.eigenvalues) for s in self.states
        )

    def eigenvalue_table(self) -> list[tuple]:
        return [s.eigenvalues for s in self.states]

    @classmethod
    def from_dict(cls, data: dict) -> "Ensemble":
        try:
            d = int(data["d"])
            states = data["states"]
            weights = data["weights"]
        except (KeyError, TypeError, ValueError) as exc:
            raise EnsembleError(f"bad ensemble description: {exc}") from exc
        for s in states:
            if len(s) != d:
                raise EnsembleError(f"state {s!r} does not have d={d} entries")
        return cls(tuple(weights), tuple(DiagonalState(tuple(s)) for s in states))

    def to_dict(self) -> dict:
        def enc(v):
            return str(v) if isinstance(v, Fraction) else v

        return {
            "d": self.d,
            "states": [[enc(v) for v in s.eigenvalues] for s in self.states],
            "weights": [enc(w) for w in self.weights],
        }

    @classmethod
    def load(cls, path) -> "Ensemble":
        with open(Path(path)) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise EnsembleError(f"{path}: {exc}") from exc
        return cls.from_dict(data)

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def blind_example_ensemble(exact: bool = True) -> Ensemble:
    """``{(1/2, |1><1|), (1/2, identity/2)}``, the standard blind counterexample."""
    half = Fraction(1, 2) if exact else 0.5
    return Ensemble((half, half), ((0, 1), (half, half)))


def average_state(ensemble: Ensemble) -> DiagonalState:
    """Eigenvalue-wise convex combination ``sum_k p_k lambda^k``."""
    d = ensemble.d
    mixed = [0] * d
    for p, state in zip(ensemble.weights, ensemble.states):
        for j in range(d):
            mixed[j] += p * state.eigenvalues[j]
    return DiagonalState(tuple(mixed))


def entropy_bits(state: DiagonalState) -> float:
    """Shannon entropy of the eigenvalues in bits, with ``0 log 0 = 0``."""
    h = -math.fsum(
        float(v) * math.log2(v) for v in state.eigenvalues if v > 0
    )
    return max(h, 0.0)


def levitin_holevo(ensemble: Ensemble) -> float:
    """``S(rho) - sum_k p_k S(rho_k)`` in bits."""
    conditional = math.fsum(
        float(p) * entropy_bits(s) for p, s in zip(ensemble.weights, ensemble.states)
    )
    value = entropy_bits(average_state(ensemble)) - conditional
    return max(value, 0.0)
