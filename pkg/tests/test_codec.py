import io
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lhcompress.analysis import CodebookSize
from lhcompress.codec import (
    FAST,
    LITERAL,
    CodecParams,
    MalformedMessageError,
    Message,
    codebook_strings,
    decode,
    encode,
    margin_schedule,
    message_bit_length,
    pack_message,
    paper_S_schedule,
    parse_s_policy,
    read_stream,
    schedule_params,
    unpack_message,
    write_stream,
)
from lhcompress.ensemble import Ensemble, levitin_holevo
from lhcompress.sequence import block_counts, block_structure, mixture_weights, sample_target_counts
from lhcompress.shared_randomness import TARGET_COUNTS, derive_stream


def test_widths():
    p = CodecParams(8, 16)
    assert (p.count_width, p.index_width) == (4, 5)
    assert message_bit_length(p, 2) == 9
    assert message_bit_length(CodecParams(8, 16), 1) == 5


def test_literal_cap():
    with pytest.raises(ValueError, match="mode='fast'"):
        CodecParams(40, CodebookSize.from_log2(30.0), mode=LITERAL, literal_cap=2**20)
    with pytest.raises(ValueError):
        CodecParams(4, 2, mode="other")


@pytest.mark.parametrize("mode", [LITERAL, FAST])
def test_round_trip_hits_target_counts(blind, seed, mode):
    spec = block_structure((0, 1, 1, 0, 1, 0, 0, 1))
    params = CodecParams(8, 64, mode=mode)
    errors = 0
    for i in range(200):
        msg = encode(spec, blind, params, seed, i)
        out = decode(msg, blind, params, seed, i, spec)
        assert out.shape == (8,) and out.max() <= 1
        if msg.error:
            errors += 1
            continue
        x = sample_target_counts(spec, blind, derive_stream(seed, TARGET_COUNTS, i))
        assert block_counts(spec, out, 2) == x
        if mode == FAST:
            assert msg.target_counts == x
    assert errors < 200


def test_literal_index_points_at_match(blind, seed):
    spec = block_structure((0, 0, 1, 1))
    params = CodecParams(4, 8, mode=LITERAL)
    w = mixture_weights(spec, blind)
    for i in range(50):
        msg = encode(spec, blind, params, seed, i)
        if msg.error:
            continue
        book = codebook_strings(seed, i, params, w, 1, 8)
        x = sample_target_counts(spec, blind, derive_stream(seed, TARGET_COUNTS, i))
        assert block_counts(spec, book[msg.index - 1], 2) == x
        assert np.array_equal(decode(msg, blind, params, seed, i), book[msg.index - 1])


def test_literal_decoder_needs_only_header(blind, seed):
    spec = block_structure((1, 0, 1, 0))
    params = CodecParams(4, 8, mode=LITERAL)
    msg = encode(spec, blind, params, seed, 3)
    assert np.array_equal(decode(msg, blind, params, seed, 3), decode(msg, blind, params, seed, 3, spec))


def test_encode_is_deterministic(blind, seed):
    spec = block_structure((0, 1, 1, 0))
    for mode in (LITERAL, FAST):
        p = CodecParams(4, 3, mode=mode)
        assert encode(spec, blind, p, seed, 11) == encode(spec, blind, p, seed, 11)


def test_fast_decode_requires_spec(blind, seed):
    spec = block_structure((0, 1, 1, 0))
    p = CodecParams(4, 1000)
    msg = encode(spec, blind, p, seed, 0)
    assert not msg.error
    with pytest.raises(ValueError):
        decode(msg, blind, p, seed, 0)


def test_malformed_messages(blind, seed):
    p = CodecParams(4, 8, mode=LITERAL)
    with pytest.raises(MalformedMessageError):
        decode(Message((5,), 1), blind, p, seed, 0)
    with pytest.raises(MalformedMessageError):
        decode(Message((2,), 9), blind, p, seed, 0)
    with pytest.raises(MalformedMessageError):
        decode(Message((2, 1), 1), blind, p, seed, 0)


def test_input_mismatch(blind, seed):
    with pytest.raises(ValueError):
        encode(block_structure((0, 1, 0)), blind, CodecParams(4, 2), seed, 0)


def _messages():
    return st.integers(1, 40).flatmap(
        lambda N: st.tuples(
            st.just(N),
            st.integers(1, 3),
            st.integers(2, 4),
            st.integers(1, 1000),
            st.sampled_from([LITERAL, FAST]),
            st.data(),
        )
    )


@settings(max_examples=150, deadline=None)
@given(_messages())
def test_pack_unpack_round_trip(args):
    N, L, d, S, mode, data = args
    params = CodecParams(N, S, d, mode)
    cuts = sorted(data.draw(st.lists(st.integers(0, N), min_size=L - 1, max_size=L - 1)))
    sizes = [b - a for a, b in zip([0] + cuts, cuts + [N])]
    index = data.draw(st.integers(0, S))
    target = None
    if mode == FAST and index:
        target = []
        for n_k in sizes:
            parts = sorted(data.draw(st.lists(st.integers(0, n_k), min_size=d - 1, max_size=d - 1)))
            target.append(tuple(b - a for a, b in zip([0] + parts, parts + [n_k])))
        target = tuple(target)
    msg = Message(tuple(sizes[:-1]), index, target)
    payload, nbits = pack_message(msg, params, L)
    assert len(payload) == (nbits + 7) // 8
    if not target:
        assert nbits == message_bit_length(params, L)
    assert unpack_message(payload, nbits, params, L) == msg


def test_pack_bit_layout():
    p = CodecParams(8, 16, mode=LITERAL)
    payload, nbits = pack_message(Message((5,), 3), p, 2)
    # 0101 then 00011, padded: 0101 0001 1000 0000
    assert (payload, nbits) == (bytes([0b01010001, 0b10000000]), 9)


def test_unpack_rejects_garbage():
    p = CodecParams(8, 16, mode=LITERAL)
    with pytest.raises(MalformedMessageError):
        unpack_message(b"\x00", 9, p, 2)
    with pytest.raises(MalformedMessageError):
        unpack_message(b"\xff\xff", 9, p, 2)
    with pytest.raises(MalformedMessageError):
        unpack_message(b"\x00\x00\x00", 9, p, 2)


def test_stream_file_round_trip(tmp_path):
    records = [(0, b"\x12\x80", 9), (7, b"\xff", 3)]
    path = tmp_path / "s.lhc"
    write_stream(path, records)
    assert path.read_bytes()[:4] == b"LHC1"
    assert list(read_stream(path)) == records
    buf = io.BytesIO()
    write_stream(buf, records)
    assert list(read_stream(buf.getvalue())) == records
    with pytest.raises(MalformedMessageError):
        list(read_stream(b"XXXX"))
    with pytest.raises(MalformedMessageError):
        list(read_stream(buf.getvalue()[:-1]))


def test_schedules(blind_float):
    I = levitin_holevo(blind_float)
    p = margin_schedule(20, blind_float, 0.25)
    assert p.S.value == int(np.ceil(2 ** (20 * (I + 0.25))))
    q = paper_S_schedule(1000, blind_float)
    assert q.S.value is None and q.S.log2 > 1000 * I
    f = [paper_S_schedule(N, blind_float).S.log2 / N - I for N in (50, 100, 200, 400, 1000)]
    assert all(a > b for a, b in zip(f, f[1:]))
    with pytest.raises(ValueError):
        margin_schedule(20, blind_float, 0.0)


def test_parse_s_policy():
    assert parse_s_policy("explicit:16") == ("explicit", 16)
    assert parse_s_policy("margin:0.1") == ("margin", 0.1)
    assert parse_s_policy("paper:2,0.5") == ("paper", 2.0, 0.5)
    assert parse_s_policy("paper") == ("paper", 1.0, 1.0)
    for bad in ("explicit:0", "margin:-1", "nope:3", "explicit:x"):
        with pytest.raises(ValueError):
            parse_s_policy(bad)


def test_schedule_params_explicit(blind):
    p = schedule_params(8, blind, "explicit:16", mode=LITERAL)
    assert p.S.value == 16 and p.mode == LITERAL


def test_qutrit_round_trip(seed):
    e = Ensemble((Fraction(1, 2), Fraction(1, 2)), ((Fraction(1, 2), Fraction(1, 4), Fraction(1, 4)), (0, 0, 1)))
    spec = block_structure((0, 1, 0, 0, 1))
    for mode in (LITERAL, FAST):
        p = CodecParams(5, 200, 3, mode)
        for i in range(20):
            msg = encode(spec, e, p, seed, i)
            out = decode(msg, e, p, seed, i, spec)
            if not msg.error:
                assert all(out[j] == 2 for j in spec.positions[1])
                payload, nbits = pack_message(msg, p, 2)
                assert unpack_message(payload, nbits, p, 2) == msg
