"""
Capacity planning: what one carrier packet holds once the micro protocol
header is paid for, and how many packets a payload needs.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional

from src.engine.endpoint import open_session
from src.engine.session import Role, SessionConfig
from src.protocol.fields import HeaderDesign

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CapacityPlan:
    config: SessionConfig
    gross_bits: int
    header_bits: int
    net_bits: int
    segment_bytes: int
    max_request_bytes: int
    payload_bytes: Optional[int] = None
    requests: int = 0
    packets: int = 0
    responses: int = 0

    @property
    def packets_per_second(self) -> float:
        return self.config.codec.nominal_rate_hz / self.config.frame_codes

    @property
    def net_bits_per_second(self) -> float:
        return self.net_bits * self.packets_per_second

    @property
    def transfer_seconds(self) -> float:
        return self.packets / self.packets_per_second

    def as_dict(self) -> Dict[str, object]:
        values: Dict[str, object] = {
            "design": self.config.header_design.value,
            "codec": self.config.codec.value,
            "algorithm": self.config.alg.value,
            "embedding": self.config.placement.mode.value,
            "frame_codes": self.config.frame_codes,
            "packets_per_second": round(self.packets_per_second, 3),
            "gross_bits_per_packet": self.gross_bits,
            "header_bits": self.header_bits,
            "net_bits_per_packet": self.net_bits,
            "net_bits_per_second": round(self.net_bits_per_second, 3),
            "segment_bytes": self.segment_bytes,
            "max_request_bytes": self.max_request_bytes,
        }
        if self.payload_bytes is not None:
            values.update(payload_bytes=self.payload_bytes, requests=self.requests, packets=self.packets,
                          responses=self.responses, seconds=round(self.transfer_seconds, 3))
        return values


def _request_sizes(payload_bytes: int, max_request: int) -> List[int]:
    if payload_bytes == 0:
        return [0]
    full, rest = divmod(payload_bytes, max_request)
    return [max_request] * full + ([rest] if rest else [])


def _packets_for(config: SessionConfig, segments: int, first: bool) -> int:
    if config.header_design is HeaderDesign.STATIC:
        return 1 + segments
    status = 0
    if segments:
        status = int(config.send_nho)
        if first:
            status += int(config.send_ver) + int(config.send_fmt)
    return 2 + status + 2 * segments


def _responses_for(config: SessionConfig, segments: int) -> int:
    n = config.ack_every_n
    if config.header_design is HeaderDesign.STATIC:
        return max(1, -(-segments // n))
    return segments // n + 1


def plan_capacity(config: SessionConfig, payload_bytes: Optional[int] = None) -> CapacityPlan:
    """Per-packet figures at the worst-case offset, plus a loss-free transfer plan when a size is given."""
    session = open_session(config, Role.SENDER)
    offset = config.worst_offset
    head = session.dat_head_bits()
    segment = session.segment_bytes()
    plan = dict(
        config=config,
        gross_bits=config.packet_capacity_bits(offset),
        header_bits=head,
        net_bits=config.body_capacity(offset, head),
        segment_bytes=segment,
        max_request_bytes=session.max_request_bytes(),
    )
    if payload_bytes is None:
        return CapacityPlan(**plan)
    packets = responses = 0
    sizes = _request_sizes(payload_bytes, session.max_request_bytes())
    for i, size in enumerate(sizes):
        segments = -(-size // segment)
        packets += _packets_for(config, segments, first=i == 0)
        responses += _responses_for(config, segments)
    logger.debug("%d bytes need %d packets in %d requests", payload_bytes, packets, len(sizes))
    return CapacityPlan(payload_bytes=payload_bytes, requests=len(sizes), packets=packets,
                        responses=responses, **plan)
