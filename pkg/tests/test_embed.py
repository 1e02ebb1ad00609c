"""
Unit tests for bit strings, bit-plane embedding and element placement.
"""
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from src.audio.codecs import CodecId, EncodedStream
from src.errors import CapacityError, TruncationError, UnsupportedCombinationError
from src.stego.bits import (
    BitReader,
    as_bits,
    bits_to_bytes,
    bits_to_int,
    bytes_to_bits,
    int_to_bits,
    to_str,
)
from src.stego.embed import (
    EmbedAlgorithm,
    Placement,
    PlacementMode,
    capacity,
    embed_bits,
    extract_bits,
    hidden_fraction,
)
from src.stego.framing import GAP_BITS, body_capacity_bits, lift_element, place_element


def _ulaw(codes):
    return EncodedStream(CodecId.ULAW, codes)


def _valid_pairs():
    for codec in CodecId:
        for alg in EmbedAlgorithm:
            if alg is EmbedAlgorithm.LSB6 and codec is CodecId.DVI:
                continue
            yield codec, alg


# ---------------------------------------------------------------------------
# BitString helpers
# ---------------------------------------------------------------------------

class TestBits:
    def test_int_round_trip(self):
        assert to_str(int_to_bits(5, 4)) == "0101"
        assert bits_to_int(as_bits("0101")) == 5

    def test_int_too_wide(self):
        with pytest.raises(ValueError):
            int_to_bits(16, 4)

    def test_bytes_msb_first(self):
        assert to_str(bytes_to_bits(b"\x80\x01")) == "1000000000000001"
        assert bits_to_bytes(as_bits("10000000")) == b"\x80"

    def test_separators_ignored(self):
        assert to_str(as_bits("00·00000·1")) == "00000001"

    def test_reader_truncation(self):
        reader = BitReader(as_bits("101"))
        assert reader.read(2) == 2
        with pytest.raises(TruncationError):
            reader.read(2)


# ---------------------------------------------------------------------------
# Algorithms and capacity
# ---------------------------------------------------------------------------

class TestCapacity:
    def test_lsb1(self):
        assert capacity(_ulaw(np.zeros(160)), EmbedAlgorithm.LSB1) == 160

    def test_lsb2(self):
        assert capacity(_ulaw(np.zeros(160)), EmbedAlgorithm.LSB2) == 320

    def test_lsb6_on_dvi(self):
        with pytest.raises(UnsupportedCombinationError):
            capacity(EncodedStream(CodecId.DVI, np.zeros(220)), EmbedAlgorithm.LSB6)

    def test_planes(self):
        assert EmbedAlgorithm.MSB.planes(8) == (7,)
        assert EmbedAlgorithm.MSB.planes(4) == (3,)
        assert EmbedAlgorithm.LSB2.planes(4) == (1, 0)
        assert EmbedAlgorithm.LSB6.planes(8) == (5,)

    def test_placement_offset(self):
        with pytest.raises(ValueError):
            Placement(PlacementMode.FIXED, -1)
        with pytest.raises(ValueError):
            Placement(PlacementMode.FIXED, 160).check(160)
        Placement(PlacementMode.CHAINED, 159).check(160)


# ---------------------------------------------------------------------------
# embed / extract
# ---------------------------------------------------------------------------

class TestEmbed:
    def test_lsb1_single_bit(self):
        out = embed_bits(_ulaw([0b10110100]), EmbedAlgorithm.LSB1, 0, as_bits("1"))
        assert out.codes.tolist() == [0b10110101]

    def test_msb(self):
        out = embed_bits(_ulaw([0x00]), EmbedAlgorithm.MSB, 0, as_bits("1"))
        assert out.codes.tolist() == [0x80]

    def test_lsb2_pair(self):
        out = embed_bits(_ulaw([0x00]), EmbedAlgorithm.LSB2, 0, as_bits("11"))
        assert out.codes.tolist() == [0x03]

    def test_lsb2_first_bit_goes_to_bit_one(self):
        out = embed_bits(_ulaw([0x00]), EmbedAlgorithm.LSB2, 0, as_bits("10"))
        assert out.codes.tolist() == [0x02]

    def test_lsb6(self):
        out = embed_bits(_ulaw([0xFF]), EmbedAlgorithm.LSB6, 0, as_bits("0"))
        assert out.codes.tolist() == [0xDF]

    def test_cover_not_mutated(self):
        cover = _ulaw(np.zeros(8))
        embed_bits(cover, EmbedAlgorithm.LSB1, 0, as_bits("1111"))
        assert not cover.codes.any()

    def test_overflow(self):
        with pytest.raises(CapacityError) as info:
            embed_bits(_ulaw(np.zeros(4)), EmbedAlgorithm.LSB1, 2, as_bits("111"))
        assert info.value.shortfall_bits == 1

    def test_extract_zero_stream(self):
        assert not extract_bits(_ulaw(np.zeros(16)), EmbedAlgorithm.LSB1, 0, 16).any()

    def test_extract_nothing(self):
        assert extract_bits(_ulaw(np.zeros(1)), EmbedAlgorithm.LSB1, 0, 0).size == 0

    def test_extract_out_of_range(self):
        with pytest.raises(CapacityError):
            extract_bits(_ulaw(np.zeros(4)), EmbedAlgorithm.LSB1, 0, 5)

    def test_round_trip_property(self):
        rng = np.random.default_rng(7)
        pairs = list(_valid_pairs())
        for case in range(10_000):
            codec, alg = pairs[case % len(pairs)]
            n_codes = int(rng.integers(1, 64))
            stream = EncodedStream(codec, rng.integers(0, 1 << codec.bits_per_code, n_codes))
            offset = int(rng.integers(0, n_codes))
            room = (n_codes - offset) * alg.bits_targeted(codec.bits_per_code)
            bits = rng.integers(0, 2, int(rng.integers(0, room + 1))).astype(np.uint8)
            stego = embed_bits(stream, alg, offset, bits)
            assert np.array_equal(extract_bits(stego, alg, offset, bits.size), bits)

    def test_locality(self):
        rng = np.random.default_rng(3)
        cover = _ulaw(rng.integers(0, 256, 100))
        bits = rng.integers(0, 2, 30).astype(np.uint8)
        stego = embed_bits(cover, EmbedAlgorithm.LSB2, 10, bits)
        diff = cover.codes ^ stego.codes
        assert not diff[:10].any() and not diff[25:].any()
        assert not (diff & 0xFC).any()


class TestHiddenFraction:
    def test_fraction(self):
        assert hidden_fraction(16, _ulaw(np.zeros(60))) == pytest.approx(16 / 480)

    def test_zero(self):
        assert hidden_fraction(0, _ulaw(np.zeros(60))) == 0

    def test_empty(self):
        with pytest.raises(ValueError):
            hidden_fraction(0, _ulaw([]))

    def test_scenario_one_cadence(self):
        assert f"{100 * hidden_fraction(16, _ulaw(np.zeros(480))):.3f}%" == "0.417%"


# ---------------------------------------------------------------------------
# Element placement
# ---------------------------------------------------------------------------

def _peek(width):
    return lambda bits: (width, True)


class TestPlacement:
    def test_fixed_is_contiguous(self):
        cover = _ulaw(np.zeros(40))
        head, body = as_bits("101"), as_bits("1111")
        stego = place_element(cover, EmbedAlgorithm.LSB1, PlacementMode.FIXED, 2, head, body)
        assert stego.codes[2:9].tolist() == [1, 0, 1, 1, 1, 1, 1]

    def test_chained_round_trip(self):
        rng = np.random.default_rng(11)
        cover = _ulaw(rng.integers(0, 256, 160))
        head = rng.integers(0, 2, 15).astype(np.uint8)
        body = rng.integers(0, 2, 64).astype(np.uint8)
        stego = place_element(cover, EmbedAlgorithm.LSB1, PlacementMode.CHAINED, 4, head, body, gap=9)
        lifted = lift_element(stego, EmbedAlgorithm.LSB1, PlacementMode.CHAINED, 4, _peek(15))
        assert np.array_equal(lifted[:79], np.concatenate([head, body]))

    def test_chained_gap_moves_body(self):
        cover = _ulaw(np.zeros(64))
        stego = place_element(cover, EmbedAlgorithm.LSB1, PlacementMode.CHAINED, 0,
                              as_bits("111"), as_bits("1"), gap=6)
        # 3 header bits + 5 gap bits fill codes 0..7, the body sits 6 codes later
        assert stego.codes[8 + 6] == 1
        assert not stego.codes[8:14].any()

    def test_gap_clamped_to_room(self):
        cover = _ulaw(np.zeros(12))
        stego = place_element(cover, EmbedAlgorithm.LSB1, PlacementMode.CHAINED, 0,
                              as_bits("1"), as_bits("11"), gap=31)
        lifted = lift_element(stego, EmbedAlgorithm.LSB1, PlacementMode.CHAINED, 0, _peek(1))
        assert lifted[:3].tolist() == [1, 1, 1]

    def test_chained_without_body_is_contiguous(self):
        cover = _ulaw(np.zeros(20))
        stego = place_element(cover, EmbedAlgorithm.LSB1, PlacementMode.CHAINED, 0, as_bits("11"), as_bits(""))
        assert stego.codes[:3].tolist() == [1, 1, 0]

    def test_chained_overflow(self):
        with pytest.raises(CapacityError):
            place_element(_ulaw(np.zeros(10)), EmbedAlgorithm.LSB1, PlacementMode.CHAINED, 0,
                          as_bits("111"), as_bits("1111"))

    def test_body_capacity(self):
        fixed = body_capacity_bits(160, EmbedAlgorithm.LSB1, 8, PlacementMode.FIXED, 0, 15)
        chained = body_capacity_bits(160, EmbedAlgorithm.LSB1, 8, PlacementMode.CHAINED, 0, 15)
        assert fixed == 145
        assert chained == 160 - (15 + GAP_BITS)
