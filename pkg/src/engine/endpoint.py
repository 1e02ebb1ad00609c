"""
Covert endpoints: a session bound to a cover stream, RTP framing and a
channel. The endpoint turns engine actions into stego packets and incoming
packets into engine events, and keeps the transcript.
"""
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, Optional, Tuple

import numpy as np

from src.audio.codecs import EncodedStream
from src.engine.dynamic_session import DynamicSession
from src.engine.session import ActionKind, CovertSession, EngineAction, Role, SessionConfig
from src.engine.static_session import StaticSession
from src.errors import CapacityError, SessionError, StegoError
from src.protocol.fields import HeaderDesign, PayloadFormat
from src.stego.framing import lift_element, place_element
from src.transport.rtp import RtpPacket, RtpStream, SequenceUnwrapper

logger = logging.getLogger(__name__)


def open_session(config: SessionConfig, role: Role) -> CovertSession:
    if config.header_design is HeaderDesign.STATIC:
        return StaticSession(config, role)
    return DynamicSession(config, role)


@dataclass(frozen=True)
class TranscriptRecord:
    direction: str
    sequence: int
    ordinal: int
    element: str
    offset_codes: int
    hidden_bits: int

    def to_line(self) -> str:
        return (f"dir={self.direction} seq={self.sequence} ordinal={self.ordinal} "
                f"offset={self.offset_codes} hidden_bits={self.hidden_bits} element=\"{self.element}\"")


class CoverCursor:
    """Hands out consecutive full frames of a cover stream."""

    def __init__(self, cover: EncodedStream, frame_codes: int, loop: bool = False):
        if len(cover) < frame_codes:
            raise CapacityError(f"cover holds {len(cover)} codes, one frame needs {frame_codes}",
                                shortfall_bits=0, progress="0 frames")
        self.cover = cover
        self.frame_codes = frame_codes
        self.loop = loop
        self.position = 0
        self.frames = 0

    @property
    def total_frames(self) -> int:
        return len(self.cover) // self.frame_codes

    def next_frame(self) -> EncodedStream:
        if self.position + self.frame_codes > len(self.cover):
            if not self.loop:
                raise CapacityError(f"cover exhausted after {self.frames} frames",
                                    progress=f"{self.frames} of {self.total_frames} frames sent")
            self.position = 0
        frame = self.cover.slice(self.position, self.position + self.frame_codes)
        self.position += self.frame_codes
        self.frames += 1
        return frame


@dataclass
class Delivery:
    payload: bytes
    fmt: PayloadFormat


class CovertEndpoint:
    """One side of a covert conversation."""

    def __init__(self, config: SessionConfig, role: Role, cover: EncodedStream, ssrc: int,
                 first_sequence: int = 0, peer_first_sequence: int = 0, loop_cover: bool = False,
                 keep_frames: bool = True):
        self.config = config
        self.session = open_session(config, role)
        self.cursor = CoverCursor(cover, config.frame_codes, loop=loop_cover)
        self.rtp = RtpStream(config.codec, ssrc, first_sequence)
        self.unwrapper = SequenceUnwrapper(peer_first_sequence)
        self.transcript: List[TranscriptRecord] = []
        self.deliveries: List[Delivery] = []
        self.received: List[RtpPacket] = []
        self.keep_frames = keep_frames
        self.cover_frames: List[EncodedStream] = []
        self.stego_frames: List[EncodedStream] = []

    @property
    def role(self) -> Role:
        return self.session.role

    def emit(self) -> RtpPacket:
        """Build the next outgoing packet; raises CapacityError when the cover runs out."""
        frame = self.cursor.next_frame()
        if self.session.timed_out:
            self._apply(self.session.on_timeout())
        action = self.session.next_outgoing()
        stego = place_element(frame, self.config.alg, self.config.placement.mode,
                              action.offset_codes, action.head, action.body, action.gap)
        packet = self.rtp.packet_for(stego)
        if self.keep_frames:
            self.cover_frames.append(frame)
            self.stego_frames.append(stego)
        self.transcript.append(TranscriptRecord("tx", packet.sequence, self.session.tick, action.summary,
                                                action.offset_codes, action.hidden_bits))
        return packet

    def receive(self, packet: RtpPacket) -> List[EngineAction]:
        ordinal = self.unwrapper.unwrap(packet.sequence)
        if ordinal < 0:
            logger.debug("packet %d precedes the session start", packet.sequence)
            return []
        self.received.append(packet)
        offset = self.session.incoming_offset(ordinal)
        try:
            frame = EncodedStream(packet.codec, packet.codes(self.config.frame_codes))
            if frame.codec is not self.config.codec:
                raise StegoError(f"expected {self.config.codec.name} packets, got {frame.codec.name}")
            bits = lift_element(frame, self.config.alg, self.config.placement.mode, offset, self.session.peek)
        except (StegoError, ValueError) as exc:
            self.session.stats.decode_errors += 1
            logger.debug("cannot read packet %d: %s", packet.sequence, exc)
            return [EngineAction(ActionKind.NOTIFY_ERROR, reason=str(exc))]
        actions = self.session.handle_incoming(bits, ordinal)
        self.transcript.append(TranscriptRecord("rx", packet.sequence, ordinal, self.session.last_incoming,
                                                offset, int(bits.size)))
        self._apply(actions)
        return actions

    def _apply(self, actions: List[EngineAction]) -> None:
        for action in actions:
            if action.kind is ActionKind.DELIVER:
                self.deliveries.append(Delivery(action.payload, action.fmt))
                logger.info("delivered %d bytes", len(action.payload))
            elif action.kind is ActionKind.NOTIFY_ERROR and action.fatal:
                raise SessionError(action.reason)

    def cover_stream(self) -> EncodedStream:
        return EncodedStream.concat(self.cover_frames)

    def stego_stream(self) -> EncodedStream:
        return EncodedStream.concat(self.stego_frames)

    def write_transcript(self, path: Path) -> None:
        Path(path).write_text("".join(record.to_line() + "\n" for record in self.transcript))


class PayloadTransfer:
    """
    Feeds a payload to a sender endpoint as consecutive requests.

    With terminate set, an empty request follows the payload so a live
    receiver knows the transfer is over.
    """

    def __init__(self, endpoint: CovertEndpoint, payload: bytes, fmt: PayloadFormat = PayloadFormat.BINARY,
                 request_bytes: Optional[int] = None, terminate: bool = False):
        if endpoint.role is not Role.SENDER:
            raise SessionError("payload transfers run on a sender endpoint")
        self.endpoint = endpoint
        self.fmt = fmt
        size = request_bytes or endpoint.session.max_request_bytes()
        self.requests: List[bytes] = [payload[i:i + size] for i in range(0, len(payload), size)]
        if terminate:
            self.requests.append(b"")
        self.started = 0

    @property
    def session(self) -> CovertSession:
        return self.endpoint.session

    @property
    def completed(self) -> int:
        return self.session.stats.requests_completed

    @property
    def done(self) -> bool:
        return self.started == len(self.requests) and self.session.idle

    def pump(self) -> None:
        if self.started < len(self.requests) and self.session.idle:
            self.session.start_request(self.requests[self.started], self.fmt)
            self.started += 1


class SimulatedLink:
    """
    Two endpoints joined by in-memory channels. A tick lets both endpoints
    emit one packet, then delivers whatever the channels let through.
    """

    def __init__(self, sender: CovertEndpoint, receiver: CovertEndpoint, forward, reverse):
        self.sender = sender
        self.receiver = receiver
        self.forward = forward
        self.reverse = reverse
        self.ticks = 0

    def tick(self) -> None:
        self.forward.send(self.sender.emit())
        self.reverse.send(self.receiver.emit())
        for packet in self.forward.drain():
            self.receiver.receive(packet)
        for packet in self.reverse.drain():
            self.sender.receive(packet)
        self.ticks += 1

    def run(self, until: Callable[[], bool], max_ticks: int) -> bool:
        """Tick until `until()` holds; False when max_ticks ran out first."""
        while not until():
            if self.ticks >= max_ticks:
                return False
            self.tick()
        return True


def run_live(endpoint: CovertEndpoint, channel, pace_s: float, finished: Callable[[], bool],
             idle_timeout_s: float = 5.0, linger_ticks: int = 0,
             on_tick: Optional[Callable[[], None]] = None) -> Tuple[int, bool]:
    """
    Real-time loop of one live endpoint: emit, then hand every arrived packet
    to the engine in arrival order. Returns (ticks, finished).
    """
    ticks = 0
    last_arrival = time.monotonic()
    done_at: Optional[int] = None
    while True:
        started = time.monotonic()
        if on_tick is not None:
            on_tick()
        channel.send(endpoint.emit())
        for packet in channel.drain():
            endpoint.receive(packet)
            last_arrival = time.monotonic()
        ticks += 1
        if done_at is None and finished():
            done_at = ticks
        if done_at is not None and ticks - done_at >= linger_ticks:
            return ticks, True
        if time.monotonic() - last_arrival > idle_timeout_s:
            logger.warning("no packets from the peer for %.1f s", idle_timeout_s)
            return ticks, False
        remaining = pace_s - (time.monotonic() - started)
        if remaining > 0:
            time.sleep(remaining)


def waiting_for_terminator(endpoint: CovertEndpoint) -> Callable[[], bool]:
    """Receiver-side completion test: the empty request that ends a live transfer arrived."""
    return lambda: any(not d.payload for d in endpoint.deliveries)


def received_payload(endpoint: CovertEndpoint) -> bytes:
    return b"".join(d.payload for d in endpoint.deliveries)


def random_payload(size: int, seed: int) -> bytes:
    return np.random.default_rng(seed).integers(0, 256, size, dtype=np.uint8).tobytes()
