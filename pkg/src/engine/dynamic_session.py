"""
Dynamic-header session.

A message travels as BOM, optional VER/FMT/NHO status updates, (LEN, DAT)
pairs and EOM, one chunk per packet. The receiver accepts chunks only while
packet ordinals are gap-free since the BOM; on a gap it answers RESEND
followed by LEN{m}, m being the first segment it is missing, and the sender
goes back to segment m.
"""
import logging
from typing import List, Optional, Tuple

from src.engine.session import (
    ActionKind,
    CovertSession,
    EngineAction,
    Outgoing,
    Phase,
    Role,
)
from src.errors import ProtocolError, SegmentationError, TruncationError
from src.protocol import dynamic_header as dh
from src.protocol.dynamic_header import DynChunk, DynType
from src.protocol.fields import MAX_SEGMENT_BYTES, Command, HeaderDesign, PayloadFormat
from src.stego.bits import BitString, bytes_to_bits, empty, int_to_bits

logger = logging.getLogger(__name__)

# The resend index travels in a LEN chunk, so it must stay below 256.
MAX_SEGMENTS = MAX_SEGMENT_BYTES


class DynamicSession(CovertSession):
    design = HeaderDesign.DYNAMIC
    max_segments = MAX_SEGMENTS

    def __init__(self, config, role: Role):
        super().__init__(config, role)
        self.state.dyn_ctx = dh.DecodeContext()
        self._segments: List[bytes] = []
        self._fmt = PayloadFormat.BINARY
        self._round_start = 0
        self._sent_ver: Optional[int] = None
        self._sent_fmt: Optional[PayloadFormat] = None
        self._resend_at: Optional[int] = None
        # receiver side
        self._in_round = False
        self._last_ordinal = -1
        self._next_index = 0
        self._orphan = False
        self._message_end = -1

    def _min_element_bits(self) -> int:
        return dh.MIN_PACKET_BITS

    def _dat_head_width(self) -> int:
        return dh.HT_BITS

    def peek(self, bits: BitString) -> Tuple[int, bool]:
        return dh.peek_dynamic(bits)

    # -- sender -----------------------------------------------------------

    def _start(self, payload: bytes, fmt: PayloadFormat) -> List[EngineAction]:
        segments = self.split(payload)
        if len(segments) > MAX_SEGMENTS:
            raise SegmentationError(
                f"{len(segments)} segments exceed the {MAX_SEGMENTS} of one message; "
                "split the payload over several requests"
            )
        self._segments = segments
        self._fmt = fmt
        self._round_start = 0
        self._resend_at = None
        self.state.expected_dat = len(segments)
        self._enqueue_round(0, restart=False)
        return []

    def _enqueue_round(self, start: int, restart: bool) -> None:
        queue = self.state.tx_queue
        queue.append(Outgoing(dh.bom()))
        if self._segments:
            cfg = self.config
            # A resend of segment 0 can mean the BOM round was lost before VER/FMT arrived.
            if cfg.send_ver and (self._sent_ver != cfg.version or (restart and start == 0)):
                queue.append(Outgoing(DynChunk(DynType.VER, cfg.version)))
                self._sent_ver = cfg.version
            if cfg.send_fmt and (self._sent_fmt is not self._fmt or (restart and start == 0)):
                queue.append(Outgoing(DynChunk(DynType.FMT, int(self._fmt))))
                self._sent_fmt = self._fmt
            if cfg.send_nho:
                queue.append(Outgoing(DynChunk(DynType.NHO, 0)))
        for k in range(start, len(self._segments)):
            part = self._segments[k]
            queue.append(Outgoing(DynChunk(DynType.LEN, len(part))))
            queue.append(Outgoing(DynChunk(DynType.DAT, data=part), ("dat", k)))
        queue.append(Outgoing(dh.eom(), ("eom",)))

    # The receiver acknowledges after every n-th segment of the message,
    # counted from segment 0, so a round started at s sees fewer DAT OKs.
    def _round_dat_oks(self) -> int:
        n = self.config.ack_every_n
        return len(self._segments) // n - self._round_start // n

    def _expected_oks(self) -> int:
        return self._round_dat_oks() + 1

    def _ok_trigger(self, index: int) -> Tuple:
        n = self.config.ack_every_n
        if index < self._round_dat_oks():
            return ("dat", (self._round_start // n + index + 1) * n - 1)
        return ("eom",)

    def _dummy(self) -> DynChunk:
        return DynChunk(DynType.DMY, self._random_dmy())

    def _probe(self) -> DynChunk:
        return DynChunk(DynType.RES, Command.RESEND)

    def _encode(self, element: DynChunk, nho: int) -> Tuple[BitString, BitString, str]:
        if element.ht is DynType.NHO:
            element = DynChunk(DynType.NHO, nho)
        if element.ht is DynType.DAT:
            return int_to_bits(int(DynType.DAT), dh.HT_BITS), bytes_to_bits(element.data), element.describe()
        return dh.encode_chunk(element), empty(), element.describe()

    def _go_back(self, m: int) -> List[EngineAction]:
        if self.state.phase not in (Phase.REQUEST_SENT, Phase.AWAITING_ACK):
            return []
        if m > len(self._segments):
            logger.debug("ignoring resend from segment %d of %d", m, len(self._segments))
            return []
        if m == self._round_start and not self._probe_outstanding:
            return []
        if m > self._round_start:
            # the receiver got further than last time
            self.state.resend_count = 0
        abort = self._count_resend(f"resend from segment {m}")
        if abort:
            return [abort]
        logger.info("receiver asked to go back to segment %d of %d", m, len(self._segments))
        self._restart_round()
        self._round_start = m
        self.state.tx_queue.clear()
        self._enqueue_round(m, restart=True)
        return []

    def _sender_handle(self, chunk: DynChunk, ordinal: int) -> List[EngineAction]:
        if chunk.ht is DynType.RES:
            if chunk.val == Command.OK:
                self._resend_at = None
                return self._on_ok()
            self.stats.resends_received += 1
            self._ticks_waiting = 0
            self._resend_at = ordinal
            return []
        if chunk.ht is DynType.LEN and self._resend_at is not None:
            follows = ordinal == self._resend_at + 1
            self._resend_at = None
            if follows:
                return self._go_back(chunk.val)
        return []

    # -- receiver ---------------------------------------------------------

    def _respond(self, chunk: DynChunk) -> None:
        self.state.tx_queue.append(Outgoing(chunk))

    def _ok(self) -> None:
        self._respond(DynChunk(DynType.RES, Command.OK))
        self.stats.oks_sent += 1

    def _resend(self, m: int) -> None:
        self._respond(DynChunk(DynType.RES, Command.RESEND))
        self._respond(DynChunk(DynType.LEN, m))
        self.stats.resends_sent += 1
        self._in_round = False

    def _answer_probe(self) -> None:
        if self.state.phase is Phase.DONE and not self._orphan:
            self._ok()
        elif self.state.phase is Phase.RECEIVING:
            self._resend(self._next_index)
        else:
            self._resend(0)

    def _on_bom(self, ordinal: int) -> None:
        if self.state.phase is not Phase.RECEIVING:
            self.state.rx_buffer = {}
            self._next_index = 0
            self.state.phase = Phase.RECEIVING
            self._orphan = False
        self._in_round = True
        self._last_ordinal = ordinal

    def _in_round_chunk(self, chunk: DynChunk, ordinal: int) -> List[EngineAction]:
        self._last_ordinal = ordinal
        if chunk.ht is DynType.DAT:
            self.state.rx_buffer[self._next_index] = chunk.data
            self._next_index += 1
            if self._next_index % self.config.ack_every_n == 0:
                self._ok()
        elif chunk.ht is DynType.REQ:
            self._in_round = False
            self._ok()
            self.state.phase = Phase.DONE
            self._message_end = ordinal
            self.state.expected_dat = self._next_index
            payload = b"".join(self.state.rx_buffer[i] for i in range(self._next_index))
            return [self._deliver(payload, self.state.dyn_ctx.effective_format())]
        elif chunk.ht is DynType.RES and chunk.val == Command.RESEND:
            self._answer_probe()
        return []

    def _receiver_handle(self, chunk: DynChunk, ordinal: int) -> List[EngineAction]:
        answered = False
        if self._in_round and ordinal != self._last_ordinal + 1:
            if ordinal <= self._last_ordinal:
                return []
            logger.debug("gap before packet %d; asking to resume at segment %d", ordinal, self._next_index)
            self._resend(self._next_index)
            answered = True
        if chunk.ht is DynType.REQ and chunk.val == dh.BOM:
            self._on_bom(ordinal)
            return []
        if self._in_round:
            return self._in_round_chunk(chunk, ordinal)
        if chunk.ht is DynType.RES:
            if chunk.val == Command.RESEND and not answered:
                self._answer_probe()
        elif chunk.ht is not DynType.DMY:
            if self.state.phase is not Phase.RECEIVING and ordinal > self._message_end:
                self._orphan = True
        return []

    def _handle(self, bits: BitString, ordinal: int) -> List[EngineAction]:
        try:
            chunk, ctx, _ = dh.decode_chunk(bits, self.state.dyn_ctx)
        except (TruncationError, ProtocolError, ValueError) as exc:
            self.stats.decode_errors += 1
            self.last_incoming = "undecodable"
            logger.debug("undecodable chunk in packet %d: %s", ordinal, exc)
            return [EngineAction(ActionKind.NOTIFY_ERROR, reason=f"undecodable chunk: {exc}")]
        self.state.dyn_ctx = ctx
        self.last_incoming = chunk.describe()
        if chunk.ht is DynType.NHO:
            self._announce(ordinal, chunk.val)
        if self.role is Role.SENDER:
            return self._sender_handle(chunk, ordinal)
        return self._receiver_handle(chunk, ordinal)
