"""The random number generator shared by encoder and decoder.

Every stream is a counter-mode Philox4x64 generator whose 128-bit key is a
BLAKE2b digest of ``(seed, session_label, purpose, index)``. The word at
cursor position ``p`` is a pure function of the key and ``p``, so both
parties can regenerate any slice of a stream without replaying it.

Each sampled symbol consumes exactly :data:`WORDS_PER_SYMBOL` words, whatever
its value, which keeps the two parties' cursors aligned.
"""
from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

WORDS_PER_SYMBOL = 1
WORDS_PER_BLOCK = 4  # Philox4x64 emits four words per counter value

CODEBOOK = "codebook"
TARGET_COUNTS = "target-counts"
CHOICE = "choice"
ERROR_FILL = "error-fill"
PURPOSES = (CODEBOOK, TARGET_COUNTS, CHOICE, ERROR_FILL)
SOURCE = "source"  # simulator's label source, not a protocol role

_INV_2_53 = 1.0 / (1 << 53)


@dataclass(frozen=True)
class SharedSeed:
    """256-bit seed plus a session label, held identically by both parties."""

    seed: bytes
    session_label: bytes = b""

    def __post_init__(self):
        if len(self.seed) != 32:
            raise ValueError(f"seed must be 32 bytes, got {len(self.seed)}")
        if isinstance(self.session_label, str):
            object.__setattr__(self, "session_label", self.session_label.encode())

    @classmethod
    def from_hex(cls, text: str, session_label: bytes | str = b"") -> "SharedSeed":
        text = text.strip().lower()
        if len(text) != 64:
            raise ValueError("seed must be 64 hexadecimal characters")
        try:
            raw = bytes.fromhex(text)
        except ValueError as exc:
            raise ValueError(f"seed is not hexadecimal: {exc}") from exc
        return cls(raw, session_label)

    @classmethod
    def generate(cls, session_label: bytes | str = b"") -> "SharedSeed":
        return cls(os.urandom(32), session_label)

    def hex(self) -> str:
        return self.seed.hex()


def _frame(part: bytes) -> bytes:
    return len(part).to_bytes(4, "big") + part


def _stream_key(seed: SharedSeed, purpose: str, index: int) -> tuple[int, int]:
    h = hashlib.blake2b(digest_size=16, person=b"lhcompress-rng01")
    h.update(seed.seed)
    h.update(_frame(seed.session_label))
    h.update(_frame(purpose.encode()))
    h.update(index.to_bytes(8, "big"))
    digest = h.digest()
    return int.from_bytes(digest[:8], "little"), int.from_bytes(digest[8:], "little")


@dataclass
class RandomStream:
    """A single-owner cursor over a keyed stream of 64-bit words."""

    seed: SharedSeed
    purpose: str
    index: int
    position: int = 0
    _key: tuple[int, int] = field(init=False, repr=False)
    _gen: np.random.Philox | None = field(default=None, init=False, repr=False)
    _gen_at: int = field(default=-1, init=False, repr=False)

    def __post_init__(self):
        if self.index < 0:
            raise ValueError("stream index must be nonnegative")
        self._key = _stream_key(self.seed, self.purpose, self.index)

    def words_at(self, start: int, count: int) -> np.ndarray:
        """``count`` raw words starting at ``start``; does not move the cursor."""
        if count <= 0:
            return np.empty(0, dtype=np.uint64)
        if start == self._gen_at:
            raw = self._gen.random_raw(count)
        else:
            # jump: restart the counter at the enclosing block, drop the lead-in
            block, offset = divmod(start, WORDS_PER_BLOCK)
            self._gen = np.random.Philox(key=list(self._key), counter=[block, 0, 0, 0])
            raw = self._gen.random_raw(offset + count)[offset:]
        self._gen_at = start + count
        return np.asarray(raw, dtype=np.uint64)

    def words(self, count: int) -> np.ndarray:
        out = self.words_at(self.position, count)
        self.position += count
        return out

    def uniforms(self, count: int) -> np.ndarray:
        """Doubles in ``[0, 1)`` from the top 53 bits of each word."""
        return (self.words(count) >> np.uint64(11)).astype(np.float64) * _INV_2_53

    def seek(self, position: int) -> None:
        self.position = position

    def fork(self) -> "RandomStream":
        """An independent cursor over the same stream, at the same position."""
        return RandomStream(self.seed, self.purpose, self.index, self.position)


def derive_stream(seed: SharedSeed, purpose: str, index: int) -> RandomStream:
    return RandomStream(seed, purpose, index)


@lru_cache(maxsize=1024)
def _inverse_cdf_table(weights: tuple) -> tuple[np.ndarray, int]:
    w = np.asarray([float(x) for x in weights], dtype=np.float64)
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
        raise ValueError("weights must be a probability vector")
    return np.cumsum(w), int(np.flatnonzero(w > 0)[-1])


def symbols_from_uniforms(u: np.ndarray, weights) -> np.ndarray:
    """Inverse-CDF map of uniforms onto symbols ``0..d-1``.

    Symbols with zero weight are never produced, including through rounding
    at the top of the cumulative table.
    """
    cdf, last = _inverse_cdf_table(tuple(weights))
    sym = np.searchsorted(cdf, u, side="right")
    return np.minimum(sym, last).astype(np.uint8)


def sample_biased_strings(stream: RandomStream, count: int, length: int, weights) -> np.ndarray:
    """``count`` i.i.d. strings as a ``(count, length)`` uint8 array."""
    u = stream.uniforms(count * length * WORDS_PER_SYMBOL)
    return symbols_from_uniforms(u, weights).reshape(count, length)


def sample_biased_string(stream: RandomStream, length: int, weights) -> np.ndarray:
    return sample_biased_strings(stream, 1, length, weights)[0]


def sample_source_labels(seed: SharedSeed, weights, length: int, index: int) -> np.ndarray:
    """A length-``length`` label sequence drawn i.i.d. from the source weights.

    Uses its own ``"source"`` stream so drawing sequences never shifts the
    protocol streams.
    """
    return sample_biased_string(derive_stream(seed, SOURCE, index), length, weights)
