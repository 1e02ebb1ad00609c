"""
Unit tests for RTP framing, sequence handling and the packet channels.
"""
import os
import sys
from dataclasses import replace

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from src.audio.codecs import CodecId, EncodedStream
from src.errors import ChannelClosedError, ConfigError, StreamConfusionError, TransportError
from src.transport.channel import LossModel, MemoryChannel, UdpChannel, parse_address
from src.transport.rtp import (
    HEADER_BYTES,
    RtpPacket,
    RtpStream,
    SequenceUnwrapper,
    decode_payload,
    depacketize,
    encode_payload,
    packetize,
)


def _packets(n, ssrc=7):
    rtp = RtpStream(CodecId.ULAW, ssrc)
    return [rtp.packet_for(EncodedStream(CodecId.ULAW, np.full(4, i))) for i in range(n)]


# ---------------------------------------------------------------------------
# RTP packets
# ---------------------------------------------------------------------------

class TestRtpPacket:
    def test_header_layout(self):
        packet = RtpPacket(0, 0x1234, 160, 0xDEADBEEF, b"\x01\x02")
        raw = packet.to_bytes()
        assert len(raw) == HEADER_BYTES + 2
        assert raw[:2] == b"\x80\x00"
        assert raw[2:4] == b"\x12\x34"
        assert raw[8:12] == b"\xde\xad\xbe\xef"

    def test_bytes_round_trip(self):
        packet = RtpPacket(5, 65535, 2**32 - 1, 1, b"\xab", marker=True)
        assert RtpPacket.from_bytes(packet.to_bytes()) == packet

    def test_short_datagram(self):
        with pytest.raises(TransportError):
            RtpPacket.from_bytes(b"\x80\x00\x00")

    def test_wrong_version(self):
        raw = bytearray(RtpPacket(0, 1, 0, 0).to_bytes())
        raw[0] = 0x40
        with pytest.raises(TransportError):
            RtpPacket.from_bytes(bytes(raw))

    def test_csrc_rejected(self):
        raw = bytearray(RtpPacket(0, 1, 0, 0).to_bytes())
        raw[0] |= 0x01
        with pytest.raises(TransportError):
            RtpPacket.from_bytes(bytes(raw))

    def test_field_ranges(self):
        with pytest.raises(ValueError):
            RtpPacket(128, 0, 0, 0)
        with pytest.raises(ValueError):
            RtpPacket(0, 1 << 16, 0, 0)

    def test_unknown_payload_type(self):
        with pytest.raises(StreamConfusionError):
            RtpPacket(96, 0, 0, 0).codec


class TestPayload:
    def test_ulaw_one_code_per_byte(self):
        assert encode_payload(EncodedStream(CodecId.ULAW, [1, 2, 255])) == b"\x01\x02\xff"

    def test_dvi_high_nibble_first(self):
        payload = encode_payload(EncodedStream(CodecId.DVI, [0x1, 0x2, 0xF, 0x0]))
        assert payload == b"\x12\xf0"
        assert decode_payload(CodecId.DVI, payload).tolist() == [1, 2, 15, 0]
        assert decode_payload(CodecId.DVI, payload, code_count=4).tolist() == [1, 2, 15, 0]

    def test_dvi_odd_frame_pads_low_nibble(self):
        payload = encode_payload(EncodedStream(CodecId.DVI, [0x3, 0x4, 0x5]))
        assert payload == b"\x34\x50"
        assert decode_payload(CodecId.DVI, payload, code_count=3).tolist() == [3, 4, 5]

    def test_stream_advances(self):
        rtp = RtpStream(CodecId.DVI, 9, first_sequence=65535, first_timestamp=100)
        first = rtp.packet_for(EncodedStream(CodecId.DVI, np.zeros(221)))
        second = rtp.packet_for(EncodedStream(CodecId.DVI, np.zeros(220)))
        assert (first.sequence, second.sequence) == (65535, 0)
        assert second.timestamp == 321
        assert not first.marker and not second.marker
        assert first.payload_type == 5


# ---------------------------------------------------------------------------
# Sequence numbers
# ---------------------------------------------------------------------------

class TestSequenceUnwrapper:
    def test_counts_from_base(self):
        unwrapper = SequenceUnwrapper(10)
        assert [unwrapper.unwrap(s) for s in (10, 11, 12)] == [0, 1, 2]

    def test_wraps_past_65535(self):
        unwrapper = SequenceUnwrapper(65534)
        assert [unwrapper.unwrap(s) for s in (65534, 65535, 0, 1)] == [0, 1, 2, 3]

    def test_reordered_packet(self):
        unwrapper = SequenceUnwrapper(0)
        assert [unwrapper.unwrap(s) for s in (0, 2, 1, 3)] == [0, 2, 1, 3]

    def test_before_start_is_negative(self):
        assert SequenceUnwrapper(0).unwrap(65535) == -1


# ---------------------------------------------------------------------------
# Packetize / depacketize
# ---------------------------------------------------------------------------

class TestDepacketize:
    def test_frames(self):
        stream = EncodedStream(CodecId.ULAW, np.arange(400) % 256)
        packets = packetize(stream, 160)
        assert [len(p.payload) for p in packets] == [160, 160, 80]
        assert [p.timestamp for p in packets] == [0, 160, 320]
        back, report = depacketize(packets, 160)
        assert back == stream
        assert report.gaps == 0

    def test_odd_dvi_frames(self):
        stream = EncodedStream(CodecId.DVI, np.arange(3 * 161) % 16)
        packets = packetize(stream, 161)
        assert [len(p.payload) for p in packets] == [81, 81, 81]
        back, _ = depacketize(packets, 161)
        assert back == stream

    def test_marker_does_not_change_dvi_length(self):
        stream = EncodedStream(CodecId.DVI, np.arange(320) % 16)
        packets = [replace(p, marker=True) for p in packetize(stream, 160)]
        back, _ = depacketize(packets, 160)
        assert back == stream

    def test_lost_frame_becomes_silence(self):
        stream = EncodedStream(CodecId.ULAW, np.zeros(480))
        packets = packetize(stream, 160)
        back, report = depacketize([packets[0], packets[2]], 160)
        assert len(back) == 480
        assert report.missing_sequences == [1]
        assert report.filled_codes == 160
        assert np.all(back.codes[160:320] == 0xFF)

    def test_out_of_order_and_duplicates(self):
        stream = EncodedStream(CodecId.ULAW, np.arange(480) % 256)
        packets = packetize(stream, 160, first_sequence=65535)
        back, report = depacketize([packets[1], packets[0], packets[2], packets[2]], 160)
        assert report.duplicates == 1
        assert back.codes[:160].tolist() == stream.codes[:160].tolist()

    def test_mixed_ssrc(self):
        with pytest.raises(StreamConfusionError):
            depacketize(_packets(1, ssrc=1) + _packets(1, ssrc=2), 4)

    def test_empty(self):
        with pytest.raises(ValueError):
            depacketize([], 160)
        with pytest.raises(ValueError):
            packetize(EncodedStream(CodecId.ULAW, []), 160)


# ---------------------------------------------------------------------------
# Channels
# ---------------------------------------------------------------------------

class TestLossModel:
    def test_range(self):
        with pytest.raises(ConfigError):
            LossModel(loss_probability=1.0)
        with pytest.raises(ConfigError):
            LossModel(reorder_probability=-0.1)

    def test_reproducible(self):
        a, b = MemoryChannel(LossModel(0.2, 0.1, seed=4)), MemoryChannel(LossModel(0.2, 0.1, seed=4))
        for packet in _packets(300):
            a.send(packet)
            b.send(packet)
        assert [p.sequence for p in a.drain()] == [p.sequence for p in b.drain()]

    def test_loss_rate(self):
        channel = MemoryChannel(LossModel(0.1, seed=1))
        for packet in _packets(5000):
            channel.send(packet)
        assert 400 < channel.stats.dropped < 600
        assert len(channel.drain()) == 5000 - channel.stats.dropped

    def test_reorder_keeps_every_packet(self):
        channel = MemoryChannel(LossModel(0.0, 0.3, seed=2))
        for packet in _packets(200):
            channel.send(packet)
        channel.close()
        order = [p.sequence for p in channel.drain()]
        assert sorted(order) == list(range(200))
        assert order != list(range(200))
        assert channel.stats.reordered > 0


class TestMemoryChannel:
    def test_fifo(self):
        channel = MemoryChannel()
        for packet in _packets(3):
            channel.send(packet)
        assert channel.recv().sequence == 0
        assert [p.sequence for p in channel.drain()] == [1, 2]
        assert channel.recv() is None

    def test_closed(self):
        channel = MemoryChannel()
        channel.close()
        with pytest.raises(ChannelClosedError):
            channel.send(_packets(1)[0])
        with pytest.raises(ChannelClosedError):
            channel.recv()


class TestUdpChannel:
    def test_parse_address(self):
        assert parse_address("10.0.0.2:5004") == ("10.0.0.2", 5004)
        assert parse_address(":5006") == ("127.0.0.1", 5006)
        with pytest.raises(ConfigError):
            parse_address("localhost")

    def test_loopback(self):
        a = UdpChannel(("127.0.0.1", 0), ("127.0.0.1", 9))
        b = UdpChannel(("127.0.0.1", 0), a.local)
        a.peer = b.local
        try:
            packet = _packets(1)[0]
            a.send(packet)
            assert b.recv(timeout=2.0) == packet
            b.send(packet)
            assert a.recv(timeout=2.0) == packet
        finally:
            a.close()
            b.close()
        with pytest.raises(ChannelClosedError):
            a.send(packet)

    def test_bind_failure(self):
        a = UdpChannel(("127.0.0.1", 0), ("127.0.0.1", 9))
        try:
            with pytest.raises(TransportError):
                UdpChannel(a.local, ("127.0.0.1", 9))
        finally:
            a.close()
