"""
Covert session engine.

A CovertSession is the single-writer state machine of one endpoint. The
endpoint drives it with exactly one event at a time:

    start_request(payload, fmt)      sender only
    next_outgoing()                  once per outgoing carrier packet
    handle_incoming(bits, ordinal)   once per received carrier packet
    on_timeout()                     when timed_out is set

Every outgoing packet carries one micro-protocol element, a dummy when the
session has nothing else to say. The static and dynamic header designs live
in StaticSession and DynamicSession; the endpoint picks one with open_session.
"""
import enum
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Deque, Dict, List, Optional, Tuple

import numpy as np

from src.audio.codecs import CodecId
from src.errors import CapacityError, ConfigError, SessionError
from src.protocol.fields import MAX_NHO, MAX_SEGMENT_BYTES, HeaderDesign, PayloadFormat
from src.stego.bits import BitString, concat, empty
from src.stego.embed import EmbedAlgorithm, Placement, PlacementMode, check_combination
from src.stego.framing import body_capacity_bits

logger = logging.getLogger(__name__)

DEFAULT_FRAME_CODES = 160
DEFAULT_RESEND_LIMIT = 16
DEFAULT_TIMEOUT_TICKS = 10


class Role(str, enum.Enum):
    SENDER = "sender"
    RECEIVER = "receiver"


class Phase(str, enum.Enum):
    IDLE = "idle"
    REQUEST_SENT = "request_sent"
    RECEIVING = "receiving"
    AWAITING_ACK = "awaiting_ack"
    DONE = "done"


class ActionKind(str, enum.Enum):
    EMIT_HIDDEN = "emit_hidden"
    DELIVER = "deliver"
    NOTIFY_ERROR = "notify_error"
    NONE = "none"


@dataclass(frozen=True)
class EngineAction:
    kind: ActionKind
    head: BitString = field(default_factory=empty)
    body: BitString = field(default_factory=empty)
    offset_codes: int = 0
    gap: int = 0
    payload: bytes = b""
    fmt: Optional[PayloadFormat] = None
    reason: str = ""
    summary: str = ""
    fatal: bool = False

    @property
    def bits(self) -> BitString:
        return concat(self.head, self.body)

    @property
    def hidden_bits(self) -> int:
        return int(self.head.size + self.body.size)


@dataclass(frozen=True)
class SessionConfig:
    header_design: HeaderDesign = HeaderDesign.STATIC
    codec: CodecId = CodecId.ULAW
    alg: EmbedAlgorithm = EmbedAlgorithm.LSB1
    placement: Placement = Placement()
    frame_codes: int = DEFAULT_FRAME_CODES
    ack_every_n: int = 1
    resend_limit: int = DEFAULT_RESEND_LIMIT
    schedule_seed: Optional[int] = None
    segment_bytes: Optional[int] = None
    timeout_ticks: int = DEFAULT_TIMEOUT_TICKS
    send_fmt: bool = True
    send_ver: bool = True
    send_nho: bool = True
    version: int = 1
    dummy_seed: int = 0

    def __post_init__(self):
        if self.ack_every_n < 1:
            raise ConfigError("ack_every_n must be >= 1")
        if self.frame_codes < 1:
            raise ConfigError("frame size must be positive")
        if self.resend_limit < 0 or self.timeout_ticks < 1:
            raise ConfigError("resend limit must be >= 0 and timeout >= 1 tick")
        if not 1 <= self.version <= 3:
            raise ConfigError("version must be 1, 2 or 3")
        check_combination(self.codec.bits_per_code, self.alg)
        try:
            self.placement.check(self.frame_codes)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.placement.initial_offset_codes > self.max_offset:
            raise ConfigError(f"initial offset must be at most {self.max_offset} to fit the NHO field")

    @property
    def bits_per_code(self) -> int:
        return self.codec.bits_per_code

    @property
    def max_offset(self) -> int:
        return min(MAX_NHO, self.frame_codes - 1)

    @property
    def worst_offset(self) -> int:
        return self.max_offset if self.schedule_seed is not None else self.placement.initial_offset_codes

    def packet_capacity_bits(self, offset_codes: int) -> int:
        return max(self.frame_codes - offset_codes, 0) * self.alg.bits_targeted(self.bits_per_code)

    def body_capacity(self, offset_codes: int, head_width: int) -> int:
        return body_capacity_bits(self.frame_codes, self.alg, self.bits_per_code,
                                  self.placement.mode, offset_codes, head_width)


class OffsetSchedule:
    """
    Offset of the element in each packet of one direction.

    Without a seed every packet uses the initial offset. With a seed the
    offsets follow a linear congruential sequence; packet 0 still uses the
    initial offset.
    """

    MODULUS = 1 << 31

    def __init__(self, initial_offset: int, max_offset: int, seed: Optional[int] = None):
        self.initial_offset = initial_offset
        self.max_offset = max_offset
        self.seed = seed
        self._states: List[int] = [(seed or 0) % self.MODULUS]

    def _state(self, ordinal: int) -> int:
        while len(self._states) <= ordinal:
            self._states.append((1103515245 * self._states[-1] + 12345) % self.MODULUS)
        return self._states[ordinal]

    def offset(self, ordinal: int) -> int:
        if self.seed is None or ordinal == 0:
            return self.initial_offset
        return (self._state(ordinal) >> 16) % (self.max_offset + 1)

    def gap(self, ordinal: int) -> int:
        """Intra-packet gap for chained bodies; announced in-band, so any value works."""
        return (self._state(ordinal + 1) >> 11) & 0x1F


@dataclass
class SessionStats:
    packets_sent: int = 0
    hidden_bits_sent: int = 0
    packets_received: int = 0
    requests_started: int = 0
    requests_completed: int = 0
    deliveries: int = 0
    oks_sent: int = 0
    resends_sent: int = 0
    oks_received: int = 0
    resends_received: int = 0
    retransmissions: int = 0
    probes: int = 0
    decode_errors: int = 0


@dataclass
class Outgoing:
    element: Any
    tag: Optional[Tuple] = None


@dataclass
class SessionState:
    role: Role
    phase: Phase = Phase.IDLE
    tx_queue: Deque[Outgoing] = field(default_factory=deque)
    rx_buffer: Dict[int, bytes] = field(default_factory=dict)
    dyn_ctx: Any = None
    expected_dat: Optional[int] = None
    resend_count: int = 0


class CovertSession:
    """Behaviour shared by both header designs; see StaticSession and DynamicSession."""

    design: HeaderDesign
    max_segments: int

    def __init__(self, config: SessionConfig, role: Role):
        self.config = config
        self.state = SessionState(role=role)
        self.schedule = OffsetSchedule(config.placement.initial_offset_codes, config.max_offset, config.schedule_seed)
        self.stats = SessionStats()
        self._rng = np.random.default_rng(config.dummy_seed)
        self._tick = -1
        self._emitted_at: Dict[Tuple, int] = {}
        self._announced: Dict[int, int] = {}
        self._ok_count = 0
        self._probe_outstanding = False
        self._ticks_waiting = 0
        self.aborted = False
        self.last_incoming = ""
        self._check_fits()

    # -- sizing -----------------------------------------------------------

    def _min_element_bits(self) -> int:
        raise NotImplementedError

    def _dat_head_width(self) -> int:
        raise NotImplementedError

    def _check_fits(self) -> None:
        need = self._min_element_bits()
        have = self.config.packet_capacity_bits(self.config.worst_offset)
        if have < need:
            raise CapacityError(
                f"{have} hidden bits per packet at offset {self.config.worst_offset}, "
                f"the {self.design.value} header needs {need}",
                shortfall_bits=need - have,
            )
        self.segment_bytes()

    def segment_bytes(self) -> int:
        """Payload bytes per DAT element at the worst-case offset."""
        fit = min(MAX_SEGMENT_BYTES,
                  self.config.body_capacity(self.config.worst_offset, self._dat_head_width()) // 8)
        if fit < 1:
            raise CapacityError("no room for a single payload byte per packet", shortfall_bits=8)
        wanted = self.config.segment_bytes
        if wanted is None:
            return fit
        if wanted > fit:
            raise CapacityError(f"{wanted}-byte segments do not fit; at most {fit} bytes per packet",
                                shortfall_bits=8 * (wanted - fit))
        return wanted

    def dat_head_bits(self) -> int:
        """Header bits every DAT element pays before its payload."""
        return self._dat_head_width()

    def max_request_bytes(self) -> int:
        return self.segment_bytes() * self.max_segments

    def split(self, payload: bytes) -> List[bytes]:
        size = self.segment_bytes()
        return [payload[i:i + size] for i in range(0, len(payload), size)]

    # -- public surface ---------------------------------------------------

    @property
    def role(self) -> Role:
        return self.state.role

    @property
    def tick(self) -> int:
        """Ordinal of the last packet sent, -1 before the first."""
        return self._tick

    @property
    def phase(self) -> Phase:
        return self.state.phase

    @property
    def idle(self) -> bool:
        return self.state.phase in (Phase.IDLE, Phase.DONE)

    @property
    def timed_out(self) -> bool:
        return (self.state.phase is Phase.AWAITING_ACK
                and self._ticks_waiting >= self.config.timeout_ticks)

    def incoming_offset(self, ordinal: int) -> int:
        """Where the element of incoming packet `ordinal` starts."""
        return self._announced.get(ordinal, self.schedule.offset(ordinal))

    def start_request(self, payload: bytes, fmt: PayloadFormat = PayloadFormat.BINARY) -> List[EngineAction]:
        if self.role is not Role.SENDER:
            raise SessionError("only a sender session starts requests")
        if self.state.phase not in (Phase.IDLE, Phase.DONE):
            raise SessionError(f"cannot start a request in phase {self.state.phase.value}")
        self.state.resend_count = 0
        self._ok_count = 0
        self._probe_outstanding = False
        self._ticks_waiting = 0
        self.aborted = False
        self.stats.requests_started += 1
        actions = self._start(bytes(payload), PayloadFormat(fmt))
        self.state.phase = Phase.REQUEST_SENT
        logger.debug("request of %d bytes queued as %d elements", len(payload), len(self.state.tx_queue))
        return actions

    def next_outgoing(self) -> EngineAction:
        self._tick += 1
        ordinal = self._tick
        offset = self.schedule.offset(ordinal)
        nho = self.schedule.offset(ordinal + 1)
        if self.state.tx_queue:
            item = self.state.tx_queue.popleft()
            element = item.element
            if item.tag is not None:
                self._emitted_at[item.tag] = ordinal
        else:
            element = self._dummy()
        head, body, summary = self._encode(element, nho)
        if self.state.phase is Phase.REQUEST_SENT and not self.state.tx_queue:
            self.state.phase = Phase.AWAITING_ACK
            self._ticks_waiting = 0
            self._check_complete()
        elif self.state.phase is Phase.AWAITING_ACK:
            self._ticks_waiting += 1
        gap = self.schedule.gap(ordinal) if self.config.placement.mode is PlacementMode.CHAINED else 0
        self.stats.packets_sent += 1
        self.stats.hidden_bits_sent += int(head.size + body.size)
        return EngineAction(ActionKind.EMIT_HIDDEN, head=head, body=body, offset_codes=offset,
                            gap=gap, summary=summary)

    def handle_incoming(self, bits: BitString, ordinal: int) -> List[EngineAction]:
        self.stats.packets_received += 1
        return self._handle(bits, ordinal)

    def on_timeout(self) -> List[EngineAction]:
        """Probe the receiver's status; counts against the resend limit."""
        if self.state.phase is not Phase.AWAITING_ACK:
            return []
        self._ticks_waiting = 0
        abort = self._count_resend("status probe")
        if abort:
            return [abort]
        self.stats.probes += 1
        self._probe_outstanding = True
        self.state.tx_queue.appendleft(Outgoing(self._probe()))
        logger.debug("status probe queued (attempt %d)", self.state.resend_count)
        return []

    # -- sender bookkeeping -----------------------------------------------

    def _announce(self, ordinal: int, nho: int) -> None:
        self._announced = {ordinal + 1: nho}

    def _count_resend(self, why: str) -> Optional[EngineAction]:
        self.state.resend_count += 1
        if self.state.resend_count > self.config.resend_limit:
            logger.warning("giving up after %d resend attempts (%s)", self.state.resend_count - 1, why)
            self.state.tx_queue.clear()
            self.state.phase = Phase.DONE
            self.aborted = True
            return EngineAction(ActionKind.NOTIFY_ERROR, reason="resend limit exceeded", fatal=True)
        return None

    def _expected_oks(self) -> int:
        raise NotImplementedError

    def _ok_trigger(self, index: int) -> Tuple:
        """Tag of the element whose arrival makes the receiver send OK number `index`."""
        raise NotImplementedError

    def _on_ok(self) -> List[EngineAction]:
        if self.state.phase not in (Phase.REQUEST_SENT, Phase.AWAITING_ACK):
            return []
        self.stats.oks_received += 1
        self._ticks_waiting = 0
        if self._probe_outstanding and self.state.phase is Phase.AWAITING_ACK and not self.state.tx_queue:
            return self._complete()
        emitted = self._emitted_at.get(self._ok_trigger(self._ok_count))
        # An OK cannot be caused by an element sent in the current tick.
        if emitted is None or emitted >= self._tick:
            logger.debug("ignoring OK that predates its trigger")
            return []
        self._ok_count += 1
        self.state.resend_count = 0
        return self._check_complete()

    def _check_complete(self) -> List[EngineAction]:
        if (self.state.phase is Phase.AWAITING_ACK and not self.state.tx_queue
                and self._ok_count >= self._expected_oks()):
            return self._complete()
        return []

    def _complete(self) -> List[EngineAction]:
        self.state.phase = Phase.DONE
        self._probe_outstanding = False
        self.stats.requests_completed += 1
        logger.debug("request acknowledged")
        return [EngineAction(ActionKind.NONE, summary="acknowledged")]

    def _restart_round(self) -> None:
        self.state.phase = Phase.REQUEST_SENT
        self._ok_count = 0
        self._probe_outstanding = False
        self._ticks_waiting = 0
        self._emitted_at.clear()
        self.stats.retransmissions += 1

    def _deliver(self, payload: bytes, fmt: PayloadFormat) -> EngineAction:
        self.stats.deliveries += 1
        if fmt is PayloadFormat.TEXT and not payload.isascii():
            logger.warning("TEXT payload of %d bytes is not ASCII", len(payload))
        return EngineAction(ActionKind.DELIVER, payload=payload, fmt=fmt, summary=f"deliver {len(payload)}B")

    def _random_dmy(self) -> int:
        return int(self._rng.integers(0, 1 << 9))

    # -- design hooks -----------------------------------------------------

    def _start(self, payload: bytes, fmt: PayloadFormat) -> List[EngineAction]:
        raise NotImplementedError

    def _dummy(self) -> Any:
        raise NotImplementedError

    def _probe(self) -> Any:
        raise NotImplementedError

    def _encode(self, element: Any, nho: int) -> Tuple[BitString, BitString, str]:
        raise NotImplementedError

    def _handle(self, bits: BitString, ordinal: int) -> List[EngineAction]:
        raise NotImplementedError

    def peek(self, bits: BitString) -> Tuple[int, bool]:
        raise NotImplementedError

