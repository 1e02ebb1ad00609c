"""
Static-header session.

A request is one REQ{cnt=s} followed by s DAT elements in consecutive
packets, so the receiver maps DAT k to packet ordinal r+1+k. The receiver
acknowledges every n complete segments and settles the round once DAT s-1
arrives or the window has passed: OK plus delivery when complete, RESEND
otherwise. A RESEND makes the sender repeat the whole round; rounds of the
same request merge at the receiver.
"""
import logging
from typing import List, Tuple

from src.engine.session import (
    ActionKind,
    CovertSession,
    EngineAction,
    Outgoing,
    Phase,
    Role,
)
from src.errors import ProtocolError, SegmentationError, TruncationError
from src.protocol import static_header as sh
from src.protocol.fields import Command, HeaderDesign, PayloadFormat
from src.stego.bits import BitString

logger = logging.getLogger(__name__)


def describe(h: sh.StaticHeader) -> str:
    if isinstance(h, sh.Request):
        return f"REQ cnt={h.cnt} fmt={h.fmt.name} ver={h.ver} nho={h.nho}"
    if isinstance(h, sh.Data):
        return f"DAT len={h.len} nho={h.nho}"
    if isinstance(h, sh.Response):
        return f"RES {Command(h.cmd).name} nho={h.nho}"
    return f"DMY nho={h.nho}"


class StaticSession(CovertSession):
    design = HeaderDesign.STATIC
    max_segments = sh.MAX_SEGMENTS

    def __init__(self, config, role: Role):
        super().__init__(config, role)
        self._segments: List[bytes] = []
        self._fmt = PayloadFormat.BINARY
        # receiver side
        self._r = -1
        self._s = 0
        self._settled = True
        self._window_end = -1
        self._orphan = False

    def _min_element_bits(self) -> int:
        return max(sh.Request.width(), sh.Dummy.width())

    def _dat_head_width(self) -> int:
        return sh.Data.width()

    def peek(self, bits: BitString) -> Tuple[int, bool]:
        return sh.peek_static(bits)

    # -- sender -----------------------------------------------------------

    def _start(self, payload: bytes, fmt: PayloadFormat) -> List[EngineAction]:
        segments = self.split(payload)
        if len(segments) > sh.MAX_SEGMENTS:
            raise SegmentationError(
                f"{len(segments)} segments exceed the {sh.MAX_SEGMENTS} a request can announce; "
                "split the payload over several requests"
            )
        self._segments = segments
        self._fmt = fmt
        self.state.expected_dat = len(segments)
        self._enqueue_round()
        return []

    def _enqueue_round(self) -> None:
        self.state.tx_queue.append(Outgoing(
            sh.Request(fmt=self._fmt, cnt=len(self._segments), ver=self.config.version), ("req",)))
        for k, part in enumerate(self._segments):
            self.state.tx_queue.append(Outgoing(sh.Data(len=len(part), payload=part), ("dat", k)))

    def _expected_oks(self) -> int:
        n = self.config.ack_every_n
        return max(1, -(-len(self._segments) // n))

    def _ok_trigger(self, index: int) -> Tuple:
        s = len(self._segments)
        if s == 0:
            return ("req",)
        return ("dat", min((index + 1) * self.config.ack_every_n, s) - 1)

    def _dummy(self) -> sh.Dummy:
        return sh.Dummy(dmy=self._random_dmy())

    def _probe(self) -> sh.Response:
        return sh.Response(cmd=Command.RESEND)

    def _encode(self, element: sh.StaticHeader, nho: int) -> Tuple[BitString, BitString, str]:
        h = element.with_nho(nho)
        head, body = sh.encode_static_element(h)
        return head, body, describe(h)

    def _sender_handle(self, h: sh.StaticHeader) -> List[EngineAction]:
        if not isinstance(h, sh.Response):
            return []
        if h.cmd is Command.OK:
            return self._on_ok()
        self.stats.resends_received += 1
        self._ticks_waiting = 0
        if self.state.phase is not Phase.AWAITING_ACK:
            return []
        abort = self._count_resend("RESEND")
        if abort:
            return [abort]
        logger.info("receiver asked for a resend; repeating %d segments", len(self._segments))
        self._restart_round()
        self.state.tx_queue.clear()
        self._enqueue_round()
        return []

    # -- receiver ---------------------------------------------------------

    def _respond(self, cmd: Command) -> None:
        self.state.tx_queue.append(Outgoing(sh.Response(cmd=cmd)))
        if cmd is Command.OK:
            self.stats.oks_sent += 1
        else:
            self.stats.resends_sent += 1

    def _complete_prefix(self, k: int) -> bool:
        return all(i in self.state.rx_buffer for i in range(k + 1))

    def _settle(self) -> List[EngineAction]:
        self._settled = True
        if not self._complete_prefix(self._s - 1):
            logger.debug("round at %d incomplete: %d of %d segments", self._r, len(self.state.rx_buffer), self._s)
            self._respond(Command.RESEND)
            return []
        self._respond(Command.OK)
        payload = b"".join(self.state.rx_buffer[i] for i in range(self._s))
        self.state.phase = Phase.DONE
        self._window_end = self._r + self._s
        self._orphan = False
        return [self._deliver(payload, self._fmt)]

    def _on_request(self, h: sh.Request, ordinal: int) -> List[EngineAction]:
        receiving = self.state.phase is Phase.RECEIVING
        if receiving and h.cnt == self._s and not self._complete_prefix(self._s - 1):
            self._r = ordinal
            self._settled = False
            return []
        self._r, self._s, self._fmt = ordinal, h.cnt, h.fmt
        self.state.rx_buffer = {}
        self.state.expected_dat = h.cnt
        self.state.phase = Phase.RECEIVING
        self._settled = False
        self._orphan = False
        if h.cnt == 0:
            return self._settle()
        return []

    def _on_data(self, h: sh.Data, ordinal: int) -> List[EngineAction]:
        in_window = self._r < ordinal <= self._r + self._s
        if self.state.phase is Phase.RECEIVING and in_window and not self._settled:
            k = ordinal - self._r - 1
            self.state.rx_buffer[k] = h.payload
            if k == self._s - 1:
                return self._settle()
            n = self.config.ack_every_n
            if (k + 1) % n == 0 and self._complete_prefix(k):
                self._respond(Command.OK)
            return []
        if self.state.phase is Phase.RECEIVING and ordinal <= self._r + self._s:
            return []
        if ordinal > self._window_end:
            self._orphan = True
        return []

    def _answer_probe(self) -> None:
        if self.state.phase is Phase.DONE and not self._orphan:
            self._respond(Command.OK)
            return
        self._settled = True
        self._respond(Command.RESEND)

    def _receiver_handle(self, h: sh.StaticHeader, ordinal: int) -> List[EngineAction]:
        actions: List[EngineAction] = []
        answered = False
        if self.state.phase is Phase.RECEIVING and not self._settled and ordinal > self._r + self._s:
            actions += self._settle()
            answered = True
        if isinstance(h, sh.Request):
            actions += self._on_request(h, ordinal)
        elif isinstance(h, sh.Data):
            actions += self._on_data(h, ordinal)
        elif isinstance(h, sh.Response) and h.cmd is Command.RESEND and not answered:
            self._answer_probe()
        return actions

    def _handle(self, bits: BitString, ordinal: int) -> List[EngineAction]:
        try:
            h, _ = sh.decode_static_element(bits)
        except (TruncationError, ProtocolError, ValueError) as exc:
            self.stats.decode_errors += 1
            self.last_incoming = "undecodable"
            logger.debug("undecodable element in packet %d: %s", ordinal, exc)
            return [EngineAction(ActionKind.NOTIFY_ERROR, reason=f"undecodable header: {exc}")]
        self.last_incoming = describe(h)
        self._announce(ordinal, h.nho)
        if self.role is Role.SENDER:
            return self._sender_handle(h)
        return self._receiver_handle(h, ordinal)
