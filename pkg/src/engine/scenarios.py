"""
The three evaluation scenarios, run in-process over simulated RTP channels.

1. dummy traffic only
2. idle dummies, then a request of three segments (60 bytes each when they
   fit), repeated until the cover runs out
3. back-to-back requests as large as one request can announce
"""
import enum
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional

from src.audio.codecs import EncodedStream
from src.engine.endpoint import CovertEndpoint, SimulatedLink, TranscriptRecord, open_session, random_payload
from src.engine.session import Role, SessionConfig, SessionStats
from src.errors import CapacityError
from src.stego.embed import hidden_fraction
from src.transport.channel import LossModel, MemoryChannel

logger = logging.getLogger(__name__)

SCENARIO2_SEGMENT_BYTES = 60
SCENARIO2_SEGMENTS = 3
IDLE_PACKETS = 5
SENDER_SSRC = 0x5E11D
RECEIVER_SSRC = 0x4EC5


class Scenario(enum.IntEnum):
    DUMMIES = 1
    SMALL_REQUESTS = 2
    BULK = 3


@dataclass
class TranscriptReport:
    scenario: Scenario
    config: SessionConfig
    packets_sent: int = 0
    reverse_packets: int = 0
    hidden_bits_total: int = 0
    hidden_fraction: float = 0.0
    requests_completed: int = 0
    bytes_delivered: int = 0
    retransmissions: int = 0
    resends: int = 0
    oks: int = 0
    probes: int = 0
    segment_bytes: int = 0
    intact: bool = True
    note: str = ""
    sender_stats: SessionStats = field(default_factory=SessionStats)
    records: List[TranscriptRecord] = field(default_factory=list)
    cover: Optional[EncodedStream] = None
    stego: Optional[EncodedStream] = None

    def summary(self) -> dict:
        return {
            "scenario": int(self.scenario),
            "design": self.config.header_design.value,
            "codec": self.config.codec.value,
            "algorithm": self.config.alg.value,
            "packets": self.packets_sent,
            "hidden_bits": self.hidden_bits_total,
            "hidden_fraction": round(self.hidden_fraction, 6),
            "requests": self.requests_completed,
            "bytes": self.bytes_delivered,
            "retransmissions": self.retransmissions,
            "resends": self.resends,
            "oks": self.oks,
        }

    def to_lines(self) -> List[str]:
        head = " ".join(f"{key}={value}" for key, value in self.summary().items())
        return [f"# {head}"] + [record.to_line() for record in self.records]

    def write(self, path: Path) -> None:
        Path(path).write_text("\n".join(self.to_lines()) + "\n")


def scenario_config(scenario: Scenario, config: SessionConfig) -> SessionConfig:
    """Scenario 2 pins the segment size to 60 bytes, or the largest size that fits."""
    if scenario is not Scenario.SMALL_REQUESTS or config.segment_bytes is not None:
        return config
    fit = open_session(config, Role.SENDER).segment_bytes()
    return replace(config, segment_bytes=min(SCENARIO2_SEGMENT_BYTES, fit))


def run_scenario(scenario: Scenario, config: SessionConfig, cover: EncodedStream,
                 loss: LossModel = LossModel(), reverse_cover: Optional[EncodedStream] = None,
                 seed: int = 0) -> TranscriptReport:
    """Run one scenario until the cover is used up."""
    scenario = Scenario(scenario)
    config = scenario_config(scenario, config)
    sender = CovertEndpoint(config, Role.SENDER, cover, SENDER_SSRC)
    receiver = CovertEndpoint(replace(config, dummy_seed=config.dummy_seed + 1), Role.RECEIVER,
                              reverse_cover if reverse_cover is not None else cover, RECEIVER_SSRC,
                              loop_cover=True, keep_frames=False)
    reverse_loss = LossModel(loss.loss_probability, loss.reorder_probability, loss.seed + 1)
    link = SimulatedLink(sender, receiver, MemoryChannel(loss), MemoryChannel(reverse_loss))
    session = sender.session
    segment = session.segment_bytes()
    request_bytes = SCENARIO2_SEGMENTS * segment if scenario is Scenario.SMALL_REQUESTS else session.max_request_bytes()
    sent: List[bytes] = []
    idle_left = IDLE_PACKETS
    try:
        while True:
            if scenario is not Scenario.DUMMIES and session.idle:
                if scenario is Scenario.SMALL_REQUESTS and idle_left > 0:
                    idle_left -= 1
                else:
                    payload = random_payload(request_bytes, seed + len(sent))
                    session.start_request(payload)
                    sent.append(payload)
                    idle_left = IDLE_PACKETS
            link.tick()
    except CapacityError as exc:
        if sender.cursor.frames == 0:
            raise
        logger.debug("scenario %d stopped: %s", scenario, exc)

    stats = session.stats
    delivered = [d.payload for d in receiver.deliveries]
    report = TranscriptReport(
        scenario=scenario,
        config=config,
        packets_sent=stats.packets_sent,
        reverse_packets=receiver.session.stats.packets_sent,
        hidden_bits_total=stats.hidden_bits_sent,
        requests_completed=stats.requests_completed,
        bytes_delivered=sum(len(p) for p in delivered),
        retransmissions=stats.retransmissions,
        resends=receiver.session.stats.resends_sent,
        oks=receiver.session.stats.oks_sent,
        probes=stats.probes,
        segment_bytes=segment,
        intact=delivered == sent[:len(delivered)],
        sender_stats=stats,
        records=sender.transcript + receiver.transcript,
        cover=sender.cover_stream(),
        stego=sender.stego_stream(),
    )
    report.hidden_fraction = hidden_fraction(report.hidden_bits_total, report.stego)
    if scenario is Scenario.SMALL_REQUESTS and segment < SCENARIO2_SEGMENT_BYTES:
        report.note = f"{SCENARIO2_SEGMENT_BYTES}-byte segments do not fit; used {segment}"
    if scenario is not Scenario.DUMMIES and report.requests_completed == 0:
        raise CapacityError(
            f"cover exhausted before the first request of scenario {int(scenario)} completed",
            progress=f"{report.packets_sent} packets sent, {report.bytes_delivered} bytes delivered",
        )
    logger.info("scenario %d %s/%s/%s: %d packets, %.3f%% hidden", scenario, config.header_design.value,
                config.codec.value, config.alg.value, report.packets_sent, 100 * report.hidden_fraction)
    return report
