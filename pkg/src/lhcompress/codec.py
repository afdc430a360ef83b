"""Encoder, decoder and bit-exact wire format of the shared-codebook protocol.

Two modes share one message layout:

``literal``
    Both parties regenerate all ``S`` codebook strings from the shared seed;
    the encoder sends the (1-based) index of a uniformly chosen match, or 0.
``fast``
    The codebook is never materialized. The encoder errs with probability
    ``(1 - R)**S`` and otherwise ships its target counts; the decoder draws a
    uniform string with those counts. Conditioned on its counts a matching
    codebook string is uniform, so both modes induce the same joint law of
    (error flag, decoded string).

Payload layout, big-endian, MSB first: ``L-1`` block sizes of
``N.bit_length()`` bits each, then the index in ``S.index_width`` bits. Fast
messages that are not errors append ``L*(d-1)`` target counts (symbols
``1..d-1`` of each block) in the block-size width.
"""
from __future__ import annotations

import io
import math
import struct
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import BinaryIO, Iterable, Iterator

import numpy as np

from .analysis import CodebookSize, as_size, error_probability, match_probability
from .ensemble import Ensemble, levitin_holevo
from .sequence import (
    SequenceSpec,
    TargetCounts,
    block_structure,
    mixture_weights,
    sample_target_counts,
)
from .shared_randomness import (
    CHOICE,
    CODEBOOK,
    ERROR_FILL,
    TARGET_COUNTS,
    SharedSeed,
    derive_stream,
    sample_biased_strings,
    symbols_from_uniforms,
)

LITERAL = "literal"
FAST = "fast"
MODES = (LITERAL, FAST)
DEFAULT_LITERAL_CAP = 2**24
SYNTHETIC_INDEX = 1
_CHUNK_WORDS = 1 << 22

MAGIC = b"LHC1"
_RECORD = struct.Struct(">QI")

__all__ = [
    "CodecParams",
    "Message",
    "MalformedMessageError",
    "block_structure",
    "mixture_weights",
    "sample_target_counts",
    "encode",
    "decode",
    "message_bit_length",
    "paper_S_schedule",
    "margin_schedule",
    "parse_s_policy",
    "schedule_params",
    "pack_message",
    "unpack_message",
    "write_stream",
    "read_stream",
]


class MalformedMessageError(ValueError):
    pass


@dataclass(frozen=True)
class CodecParams:
    N: int
    S: CodebookSize
    d: int = 2
    mode: str = FAST
    literal_cap: int = DEFAULT_LITERAL_CAP

    def __post_init__(self):
        object.__setattr__(self, "S", as_size(self.S))
        if self.N < 1:
            raise ValueError("N must be at least 1")
        if self.d < 2:
            raise ValueError("d must be at least 2")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == LITERAL and (self.S.value is None or self.S.value > self.literal_cap):
            raise ValueError(
                f"S = 2^{self.S.log2:.2f} exceeds the literal-mode cap of "
                f"{self.literal_cap} strings; use mode='fast'"
            )

    @property
    def count_width(self) -> int:
        """Integer part of ``log2(N) + 1``."""
        return self.N.bit_length()

    @property
    def index_width(self) -> int:
        return self.S.index_width


@dataclass(frozen=True)
class Message:
    """Block sizes ``n_0..n_{L-2}`` plus a codebook index (0 signals an error).

    ``target_counts`` is set only on non-error fast-mode messages.
    """

    counts: tuple
    index: int
    target_counts: TargetCounts | None = None

    @property
    def error(self) -> bool:
        return self.index == 0


def message_bit_length(params: CodecParams, L: int) -> int:
    return params.index_width + (L - 1) * params.count_width


def _check_inputs(spec: SequenceSpec, ensemble: Ensemble, params: CodecParams) -> None:
    if spec.N != params.N:
        raise ValueError(f"sequence has N={spec.N}, params expect N={params.N}")
    if ensemble.d != params.d:
        raise ValueError(f"ensemble has d={ensemble.d}, params expect d={params.d}")
    if spec.n_states != ensemble.L:
        raise ValueError("sequence and ensemble disagree on the number of states")


def codebook_strings(seed: SharedSeed, seq_index: int, params: CodecParams, weights, first: int, count: int) -> np.ndarray:
    """Codebook strings ``first .. first+count-1`` (1-based) as a uint8 array."""
    stream = derive_stream(seed, CODEBOOK, seq_index)
    stream.seek((first - 1) * params.N)
    return sample_biased_strings(stream, count, params.N, weights)


def _matching_indices(spec, x, weights, params, seed, seq_index) -> np.ndarray:
    S, N = params.S.value, params.N
    chunk = max(1, _CHUNK_WORDS // N)
    found = []
    for first in range(1, S + 1, chunk):
        count = min(chunk, S + 1 - first)
        block = codebook_strings(seed, seq_index, params, weights, first, count)
        ok = np.ones(count, dtype=bool)
        for pos, x_k in zip(spec.positions, x):
            if not pos:
                continue
            sub = block[:, list(pos)]
            for j in range(1, params.d):
                ok &= (sub == j).sum(axis=1) == x_k[j]
        found.append(np.flatnonzero(ok) + first)
    return np.concatenate(found) if found else np.empty(0, dtype=np.int64)


def encode(
    spec: SequenceSpec,
    ensemble: Ensemble,
    params: CodecParams,
    seed: SharedSeed,
    seq_index: int,
) -> Message:
    _check_inputs(spec, ensemble, params)
    header = tuple(spec.counts[:-1])
    x = sample_target_counts(spec, ensemble, derive_stream(seed, TARGET_COUNTS, seq_index))
    weights = mixture_weights(spec, ensemble)
    u = derive_stream(seed, CHOICE, seq_index).uniforms(1)[0]

    if params.mode == LITERAL:
        matches = _matching_indices(spec, x, weights, params, seed, seq_index)
        if matches.size == 0:
            return Message(header, 0)
        return Message(header, int(matches[int(u * matches.size)]))

    miss = _miss_probability(spec.counts, x, weights, params.S)
    if u < miss:
        return Message(header, 0)
    return Message(header, SYNTHETIC_INDEX, x)


@lru_cache(maxsize=1 << 16)
def _miss_probability(counts: tuple, x: TargetCounts, weights: tuple, S: CodebookSize) -> float:
    # R depends on the block sizes only, so contiguous blocks stand in for the sequence
    R = match_probability(SequenceSpec.contiguous(counts), x, weights)
    return float(error_probability(R, S))


def _uniform_fill(seed: SharedSeed, seq_index: int, params: CodecParams) -> np.ndarray:
    stream = derive_stream(seed, ERROR_FILL, seq_index)
    return symbols_from_uniforms(stream.uniforms(params.N), [1.0 / params.d] * params.d)


def _uniform_in_class(spec: SequenceSpec, x: TargetCounts, seed: SharedSeed, seq_index: int, N: int) -> np.ndarray:
    # one word per position: the block's sorted symbols are shuffled by argsort
    keys = derive_stream(seed, CODEBOOK, seq_index).words(N)
    out = np.zeros(N, dtype=np.uint8)
    for pos, x_k in zip(spec.positions, x):
        if not pos:
            continue
        symbols = np.repeat(np.arange(len(x_k), dtype=np.uint8), x_k)
        pos = np.asarray(pos)
        order = np.argsort(keys[pos], kind="stable")
        out[pos[order]] = symbols
    return out


def decode(
    msg: Message,
    ensemble: Ensemble,
    params: CodecParams,
    seed: SharedSeed,
    seq_index: int,
    spec: SequenceSpec | None = None,
) -> np.ndarray:
    """Reconstruct a basis string of length ``N``.

    Literal mode needs only the block sizes in the header. Fast mode also
    needs ``spec`` for the block positions, since it stands in for a
    codebook string that would have carried them implicitly.
    """
    L = ensemble.L
    if len(msg.counts) != L - 1 or sum(msg.counts) > params.N:
        raise MalformedMessageError(f"bad block-size header {msg.counts}")
    if msg.index < 0 or (params.S.value is not None and msg.index > params.S.value):
        raise MalformedMessageError(f"index {msg.index} outside 0..S")
    if msg.error:
        return _uniform_fill(seed, seq_index, params)

    if params.mode == LITERAL:
        counts = tuple(msg.counts) + (params.N - sum(msg.counts),)
        weights = mixture_weights(SequenceSpec.contiguous(counts), ensemble)
        return codebook_strings(seed, seq_index, params, weights, msg.index, 1)[0]

    if spec is None:
        raise ValueError("fast-mode decoding needs the sequence's block positions")
    if tuple(spec.counts[:-1]) != tuple(msg.counts):
        raise MalformedMessageError("header block sizes do not match the sequence")
    if msg.target_counts is None:
        raise MalformedMessageError("fast-mode message without target counts")
    return _uniform_in_class(spec, msg.target_counts, seed, seq_index, params.N)


# ---------------------------------------------------------------------------
# codebook-size schedules


def paper_S_schedule(
    N: int,
    ensemble: Ensemble,
    K: float = 1.0,
    alpha: float = 1.0,
    mode: str = FAST,
    literal_cap: int = DEFAULT_LITERAL_CAP,
) -> CodecParams:
    """``S = N a_N b_N`` with ``a_N = sqrt(N) e^(alpha N^0.2) / K`` and
    ``b_N = 2^(N I + N^0.7)``."""
    if K <= 0 or alpha <= 0:
        raise ValueError("K and alpha must be positive")
    log2_a = 0.5 * math.log2(N) + alpha * N**0.2 / math.log(2) - math.log2(K)
    log2_b = N * levitin_holevo(ensemble) + N**0.7
    log2_S = math.log2(N) + log2_a + log2_b
    return CodecParams(N, CodebookSize.from_log2(log2_S), ensemble.d, mode, literal_cap)


def margin_schedule(
    N: int,
    ensemble: Ensemble,
    delta: float,
    mode: str = FAST,
    literal_cap: int = DEFAULT_LITERAL_CAP,
) -> CodecParams:
    """``log2 S = N (I + delta)``, rounded up to an integer ``S`` where possible."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    size = CodebookSize.from_log2(N * (levitin_holevo(ensemble) + delta))
    return CodecParams(N, size, ensemble.d, mode, literal_cap)


# ---------------------------------------------------------------------------
# bit packing and stream files


def _fields(msg: Message, params: CodecParams, L: int) -> list[tuple[int, int]]:
    fields = [(n, params.count_width) for n in msg.counts]
    fields.append((msg.index, params.index_width))
    if params.mode == FAST and not msg.error:
        for x_k in msg.target_counts:
            fields.extend((c, params.count_width) for c in x_k[1:])
    return fields


def pack_message(msg: Message, params: CodecParams, L: int) -> tuple[bytes, int]:
    """Serialize to ``(payload, bit_length)``; the payload is zero-padded to bytes."""
    if len(msg.counts) != L - 1:
        raise ValueError("header must carry L-1 block sizes")
    value, nbits = 0, 0
    for v, width in _fields(msg, params, L):
        if v < 0 or v >= 1 << width:
            raise ValueError(f"value {v} does not fit in {width} bits")
        value = (value << width) | v
        nbits += width
    pad = -nbits % 8
    return (value << pad).to_bytes((nbits + pad) // 8, "big"), nbits


def unpack_message(payload: bytes, nbits: int, params: CodecParams, L: int) -> Message:
    total = len(payload) * 8
    if total < nbits or total - nbits >= 8:
        raise MalformedMessageError("payload length does not match bit length")
    value = int.from_bytes(payload, "big") >> (total - nbits)
    cursor = nbits

    def take(width: int) -> int:
        nonlocal cursor
        if cursor < width:
            raise MalformedMessageError("payload too short")
        cursor -= width
        return (value >> cursor) & ((1 << width) - 1)

    counts = tuple(take(params.count_width) for _ in range(L - 1))
    index = take(params.index_width)
    target = None
    if params.mode == FAST and index != 0:
        blocks = counts + (params.N - sum(counts),)
        target = []
        for n_k in blocks:
            tail = [take(params.count_width) for _ in range(params.d - 1)]
            head = n_k - sum(tail)
            if head < 0:
                raise MalformedMessageError("target counts exceed block size")
            target.append((head, *tail))
        target = tuple(target)
    if cursor != 0:
        raise MalformedMessageError("trailing bits in payload")
    msg = Message(counts, index, target)
    if params.S.value is not None and index > params.S.value:
        raise MalformedMessageError(f"index {index} outside 0..S")
    return msg


def write_stream(out: BinaryIO | str | Path, records: Iterable[tuple[int, bytes, int]]) -> None:
    """Write ``(seq_index, payload, bit_length)`` records after the magic bytes."""
    if isinstance(out, (str, Path)):
        with open(out, "wb") as fh:
            write_stream(fh, records)
        return
    out.write(MAGIC)
    for seq_index, payload, nbits in records:
        if len(payload) != (nbits + 7) // 8:
            raise ValueError("payload length does not match bit length")
        out.write(_RECORD.pack(seq_index, nbits))
        out.write(payload)


def read_stream(src: BinaryIO | str | Path | bytes) -> Iterator[tuple[int, bytes, int]]:
    if isinstance(src, (str, Path)):
        with open(src, "rb") as fh:
            yield from read_stream(fh.read())
        return
    if isinstance(src, (bytes, bytearray)):
        src = io.BytesIO(src)
    if src.read(len(MAGIC)) != MAGIC:
        raise MalformedMessageError("not an LHC1 stream")
    while True:
        head = src.read(_RECORD.size)
        if not head:
            return
        if len(head) != _RECORD.size:
            raise MalformedMessageError("truncated record header")
        seq_index, nbits = _RECORD.unpack(head)
        payload = src.read((nbits + 7) // 8)
        if len(payload) != (nbits + 7) // 8:
            raise MalformedMessageError("truncated record payload")
        yield seq_index, payload, nbits


def parse_s_policy(policy) -> tuple:
    """Parse ``explicit:<S>``, ``margin:<delta>`` or ``paper:<K>,<alpha>``."""
    if isinstance(policy, tuple):
        return policy
    kind, _, arg = str(policy).partition(":")
    try:
        if kind == "explicit":
            value = int(arg)
            if value < 1:
                raise ValueError("S must be at least 1")
            return ("explicit", value)
        if kind == "margin":
            delta = float(arg)
            if not delta > 0:
                raise ValueError("margin must be positive")
            return ("margin", delta)
        if kind == "paper":
            K, alpha = (float(v) for v in arg.split(",")) if arg else (1.0, 1.0)
            return ("paper", K, alpha)
    except ValueError as exc:
        raise ValueError(f"bad S policy {policy!r}: {exc}") from exc
    raise ValueError(f"unknown S policy {policy!r}")


def schedule_params(
    N: int,
    ensemble: Ensemble,
    policy,
    mode: str = FAST,
    literal_cap: int = DEFAULT_LITERAL_CAP,
) -> CodecParams:
    policy = parse_s_policy(policy)
    if policy[0] == "explicit":
        return CodecParams(N, CodebookSize.from_int(policy[1]), ensemble.d, mode, literal_cap)
    if policy[0] == "margin":
        return margin_schedule(N, ensemble, policy[1], mode, literal_cap)
    return paper_S_schedule(N, ensemble, policy[1], policy[2], mode, literal_cap)
