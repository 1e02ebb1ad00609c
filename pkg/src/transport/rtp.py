"""
RTP framing of encoded audio (fixed 12-byte header, no CSRC, no extensions).

mu-law carries one code per payload byte. DVI4 packs two codes per byte,
first code in the high nibble. An odd frame pads the low nibble of its last
byte; the receiver learns the real code count from the timestamp step to the
next packet, or from the frame size when there is no next packet.
"""
import logging
import struct
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from src.audio.codecs import CodecId, EncodedStream
from src.errors import StreamConfusionError, TransportError

logger = logging.getLogger(__name__)

RTP_VERSION = 2
HEADER_BYTES = 12
_HEADER = struct.Struct("!BBHII")
_BY_PAYLOAD_TYPE = {codec.rtp_payload_type: codec for codec in CodecId}


@dataclass(frozen=True)
class RtpPacket:
    payload_type: int
    sequence: int
    timestamp: int
    ssrc: int
    payload: bytes = b""
    marker: bool = False
    version: int = RTP_VERSION

    def __post_init__(self):
        if self.version != RTP_VERSION:
            raise ValueError(f"RTP version {self.version} is not supported")
        if not 0 <= self.payload_type < 128:
            raise ValueError("payload type must fit 7 bits")
        if not 0 <= self.sequence < 1 << 16:
            raise ValueError("sequence must fit 16 bits")
        if not 0 <= self.timestamp < 1 << 32 or not 0 <= self.ssrc < 1 << 32:
            raise ValueError("timestamp and ssrc must fit 32 bits")

    @property
    def codec(self) -> CodecId:
        try:
            return _BY_PAYLOAD_TYPE[self.payload_type]
        except KeyError:
            raise StreamConfusionError(f"unknown payload type {self.payload_type}") from None

    def to_bytes(self) -> bytes:
        first = self.version << 6
        second = (int(self.marker) << 7) | self.payload_type
        return _HEADER.pack(first, second, self.sequence, self.timestamp, self.ssrc) + self.payload

    @classmethod
    def from_bytes(cls, datagram: bytes) -> "RtpPacket":
        if len(datagram) < HEADER_BYTES:
            raise TransportError(f"datagram of {len(datagram)} bytes is shorter than an RTP header")
        first, second, sequence, timestamp, ssrc = _HEADER.unpack_from(datagram)
        if first & 0x3F:
            raise TransportError("padding, extensions and CSRC lists are not supported")
        try:
            return cls(payload_type=second & 0x7F, sequence=sequence, timestamp=timestamp, ssrc=ssrc,
                       payload=bytes(datagram[HEADER_BYTES:]), marker=bool(second & 0x80), version=first >> 6)
        except ValueError as exc:
            raise TransportError(str(exc)) from None

    def codes(self, code_count: Optional[int] = None) -> np.ndarray:
        return decode_payload(self.codec, self.payload, code_count)


def encode_payload(frame: EncodedStream) -> bytes:
    codes = frame.codes
    if frame.codec is CodecId.ULAW:
        return codes.tobytes()
    if codes.size % 2 == 1:
        codes = np.append(codes, np.uint8(0))
    packed = (codes[0::2] << 4) | codes[1::2]
    return packed.astype(np.uint8).tobytes()


def decode_payload(codec: CodecId, payload: bytes, code_count: Optional[int] = None) -> np.ndarray:
    """Codes of one payload; a DVI code_count one short of the nibble count drops the pad nibble."""
    raw = np.frombuffer(payload, dtype=np.uint8)
    if codec is CodecId.ULAW:
        return raw.copy()
    codes = np.empty(raw.size * 2, dtype=np.uint8)
    codes[0::2] = raw >> 4
    codes[1::2] = raw & 0x0F
    if code_count is not None and code_count == codes.size - 1:
        return codes[:-1]
    return codes


class RtpStream:
    """Sender side of one RTP stream: consecutive sequence numbers and timestamps."""

    def __init__(self, codec: CodecId, ssrc: int, first_sequence: int = 0, first_timestamp: int = 0):
        self.codec = codec
        self.ssrc = ssrc & 0xFFFFFFFF
        self.sequence = first_sequence & 0xFFFF
        self.timestamp = first_timestamp & 0xFFFFFFFF

    def packet_for(self, frame: EncodedStream) -> RtpPacket:
        packet = RtpPacket(self.codec.rtp_payload_type, self.sequence, self.timestamp, self.ssrc,
                           encode_payload(frame))
        self.sequence = (self.sequence + 1) & 0xFFFF
        self.timestamp = (self.timestamp + len(frame)) & 0xFFFFFFFF
        return packet


class SequenceUnwrapper:
    """Extends 16-bit sequence numbers to a monotonic count relative to a base."""

    def __init__(self, base: int = 0):
        self.base = base & 0xFFFF
        self._last: Optional[int] = None
        self._last_value = 0

    def unwrap(self, sequence: int) -> int:
        if self._last is None:
            value = (sequence - self.base) & 0xFFFF
            # Anything in the upper half before the first packet counts as negative.
            if value >= 1 << 15:
                value -= 1 << 16
        else:
            delta = (sequence - self._last) & 0xFFFF
            if delta >= 1 << 15:
                delta -= 1 << 16
            value = self._last_value + delta
        if self._last is None or value > self._last_value:
            self._last, self._last_value = sequence, value
        return value


@dataclass
class GapReport:
    missing_sequences: List[int] = field(default_factory=list)
    duplicates: int = 0
    filled_codes: int = 0

    @property
    def gaps(self) -> int:
        return len(self.missing_sequences)


def packetize(stream: EncodedStream, frame_codes: int, ssrc: int = 0x5EC0DE,
              first_sequence: int = 0, first_timestamp: int = 0) -> List[RtpPacket]:
    if len(stream) == 0:
        raise ValueError("cannot packetize an empty stream")
    if frame_codes < 1:
        raise ValueError("frame size must be positive")
    rtp = RtpStream(stream.codec, ssrc, first_sequence, first_timestamp)
    return [rtp.packet_for(stream.slice(i, i + frame_codes)) for i in range(0, len(stream), frame_codes)]


def depacketize(packets: Iterable[RtpPacket], frame_codes: int) -> Tuple[EncodedStream, GapReport]:
    """Reassemble a stream in sequence order, filling lost frames with silence codes."""
    packets = list(packets)
    if not packets:
        raise ValueError("no packets to depacketize")
    first = packets[0]
    if any(p.ssrc != first.ssrc for p in packets):
        raise StreamConfusionError("packets from more than one SSRC")
    if any(p.payload_type != first.payload_type for p in packets):
        raise StreamConfusionError("packets with more than one payload type")
    codec = first.codec
    unwrapper = SequenceUnwrapper(first.sequence)
    by_position: Dict[int, RtpPacket] = {}
    report = GapReport()
    for packet in packets:
        position = unwrapper.unwrap(packet.sequence)
        if position in by_position:
            report.duplicates += 1
            continue
        by_position[position] = packet
    start, stop = min(by_position), max(by_position)
    silence = np.full(frame_codes, codec.silence_code, dtype=np.uint8)
    parts = []
    for position in range(start, stop + 1):
        packet = by_position.get(position)
        if packet is None:
            report.missing_sequences.append((first.sequence + position) & 0xFFFF)
            report.filled_codes += frame_codes
            parts.append(silence)
        else:
            following = by_position.get(position + 1)
            count = frame_codes if following is None else (following.timestamp - packet.timestamp) & 0xFFFFFFFF
            parts.append(packet.codes(count))
    if report.gaps:
        logger.info("filled %d lost frames with silence", report.gaps)
    return EncodedStream(codec, np.concatenate(parts)), report
