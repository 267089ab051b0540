import pytest
from hypothesis import given, strategies as st

from fleetledger.codec import CodecError, Decoder, Encoder, checked_hash, sha256


def test_u64_roundtrip_and_bounds():
    data = Encoder().u64(0).u64(2**64 - 1).done()
    dec = Decoder(data)
    assert dec.u64() == 0
    assert dec.u64() == 2**64 - 1
    with pytest.raises(CodecError):
        Encoder().u64(-1)
    with pytest.raises(CodecError):
        Encoder().u64(2**64)


def test_bytestr_is_length_prefixed():
    data = Encoder().bytestr(b"abc").done()
    assert data == b"\x00" * 7 + b"\x03" + b"abc"


@given(
    st.lists(
        st.one_of(
            st.integers(min_value=0, max_value=2**64 - 1),
            st.binary(max_size=200),
            st.text(max_size=80),
            st.floats(allow_nan=False),
            st.booleans(),
        ),
        max_size=24,
    )
)
def test_mixed_roundtrip(values):
    enc = Encoder()
    for v in values:
        if isinstance(v, bool):
            enc.boolean(v)
        elif isinstance(v, int):
            enc.u64(v)
        elif isinstance(v, bytes):
            enc.bytestr(v)
        elif isinstance(v, str):
            enc.string(v)
        else:
            enc.f64(v)
    dec = Decoder(enc.done())
    for v in values:
        if isinstance(v, bool):
            assert dec.boolean() == v
        elif isinstance(v, int):
            assert dec.u64() == v
        elif isinstance(v, bytes):
            assert dec.bytestr() == v
        elif isinstance(v, str):
            assert dec.string() == v
        else:
            assert dec.f64() == v
    dec.expect_end()


def test_truncation_detected():
    data = Encoder().bytestr(b"hello world").done()
    with pytest.raises(CodecError):
        Decoder(data[:-3]).bytestr()
    with pytest.raises(CodecError):
        Decoder(b"\xff" * 8 + b"xx").bytestr()  # absurd length prefix


def test_trailing_bytes_detected():
    data = Encoder().u64(7).done() + b"!"
    dec = Decoder(data)
    dec.u64()
    with pytest.raises(CodecError):
        dec.expect_end()


def test_hash_is_pinned_32_bytes():
    digest = sha256(b"abc")
    assert len(digest) == 32
    assert digest == checked_hash(b"abc", 0x01)
    with pytest.raises(CodecError):
        checked_hash(b"abc", 0x7F)
