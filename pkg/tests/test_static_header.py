"""
Unit tests for the static header codec.
"""
import itertools
import os
import sys

import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from src.errors import HeaderEncodingError, ProtocolError, TruncationError
from src.protocol.fields import Command, PayloadFormat
from src.protocol.static_header import (
    Data,
    Dummy,
    Request,
    Response,
    decode_static,
    decode_static_element,
    encode_static,
    encode_static_element,
    peek_static,
)
from src.stego.bits import as_bits, bits_to_int, concat, int_to_bits, to_str


# ---------------------------------------------------------------------------
# Encoding
# ---------------------------------------------------------------------------

class TestEncode:
    def test_widths(self):
        assert Request.width() == 16
        assert Data.width() == 15
        assert Response.width() == 9
        assert Dummy.width() == 16

    def test_request_example(self):
        bits = encode_static(Request(nho=0, fmt=PayloadFormat.BINARY, cnt=5, ver=1))
        assert to_str(bits) == to_str(as_bits("00·00000·1·000101·01"))
        assert bits_to_int(bits) == 0x0115

    def test_dummy_zero(self):
        assert to_str(encode_static(Dummy())) == "11" + "0" * 14

    def test_response(self):
        assert to_str(encode_static(Response(nho=3, cmd=Command.OK))) == "10" + "00011" + "00"

    def test_field_out_of_range_named(self):
        with pytest.raises(HeaderEncodingError) as info:
            encode_static(Request(cnt=64))
        assert info.value.field == "cnt"
        with pytest.raises(HeaderEncodingError) as info:
            encode_static(Data(nho=32))
        assert info.value.field == "nho"

    def test_reserved_version(self):
        with pytest.raises(HeaderEncodingError) as info:
            encode_static(Request(ver=0))
        assert info.value.field == "ver"

    def test_unknown_command(self):
        with pytest.raises(HeaderEncodingError):
            encode_static(Response(cmd=2))

    def test_data_element_body(self):
        head, body = encode_static_element(Data(len=2, payload=b"\x01\xff"))
        assert head.size == 15
        assert to_str(body) == "0000000111111111"

    def test_data_length_mismatch(self):
        with pytest.raises(HeaderEncodingError):
            encode_static_element(Data(len=3, payload=b"ab"))

    def test_with_nho(self):
        assert Request(cnt=4).with_nho(9) == Request(nho=9, cnt=4)


# ---------------------------------------------------------------------------
# Decoding
# ---------------------------------------------------------------------------

class TestDecode:
    def test_request_example(self):
        header, used = decode_static(int_to_bits(0x0115, 16))
        assert header == Request(nho=0, fmt=PayloadFormat.BINARY, cnt=5, ver=1)
        assert used == 16

    def test_truncated(self):
        with pytest.raises(TruncationError):
            decode_static(as_bits("00000000"))

    def test_reserved_version(self):
        with pytest.raises(ProtocolError):
            decode_static(as_bits("00·00000·1·000101·00"))

    def test_unknown_command(self):
        with pytest.raises(ProtocolError):
            decode_static(as_bits("10·00000·11"))

    def test_trailing_bits_untouched(self):
        bits = concat(encode_static(Response(cmd=Command.RESEND)), as_bits("1111111"))
        header, used = decode_static(bits)
        assert header == Response(cmd=Command.RESEND)
        assert used == 9

    def test_element_reads_payload(self):
        head, body = encode_static_element(Data(nho=4, len=3, payload=b"abc"))
        header, used = decode_static_element(concat(head, body, as_bits("0101")))
        assert header == Data(nho=4, len=3, payload=b"abc")
        assert used == 15 + 24

    def test_element_truncated_payload(self):
        head, body = encode_static_element(Data(len=3, payload=b"abc"))
        with pytest.raises(TruncationError):
            decode_static_element(concat(head, body[:-1]))

    def test_peek(self):
        assert peek_static(encode_static(Data(len=1))) == (15, True)
        assert peek_static(encode_static(Dummy())) == (16, False)


# ---------------------------------------------------------------------------
# Exhaustive round trips
# ---------------------------------------------------------------------------

class TestRoundTrip:
    def test_requests(self):
        for nho, fmt, cnt, ver in itertools.product(range(32), PayloadFormat, range(64), (1, 2, 3)):
            h = Request(nho=nho, fmt=fmt, cnt=cnt, ver=ver)
            assert decode_static(encode_static(h)) == (h, 16)

    def test_data_headers(self):
        for nho, length in itertools.product(range(32), range(256)):
            h = Data(nho=nho, len=length)
            assert decode_static(encode_static(h)) == (h, 15)

    def test_responses(self):
        for nho, cmd in itertools.product(range(32), Command):
            h = Response(nho=nho, cmd=cmd)
            assert decode_static(encode_static(h)) == (h, 9)

    def test_dummies(self):
        for nho, dmy in itertools.product(range(32), range(512)):
            h = Dummy(nho=nho, dmy=dmy)
            assert decode_static(encode_static(h)) == (h, 16)
