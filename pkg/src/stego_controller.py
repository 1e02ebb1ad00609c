"""
Stego Controller: orchestration and command line of the covert voice channel.
"""
import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
import polars as pl

from src.audio.audio_io import read_wav, write_wav
from src.audio.codecs import CodecId, EncodedStream, decode_stream, encode_clip
from src.config import Settings, resolve_settings
from src.engine.capacity import CapacityPlan, plan_capacity
from src.engine.endpoint import (
    CovertEndpoint,
    PayloadTransfer,
    received_payload,
    run_live,
    waiting_for_terminator,
)
from src.engine.scenarios import RECEIVER_SSRC, SENDER_SSRC, Scenario, TranscriptReport, run_scenario
from src.engine.session import Role, SessionConfig
from src.errors import (
    CapacityError,
    ConfigError,
    ExternalToolError,
    SessionError,
    StegoError,
    TransportError,
)
from src.formatters.result_formatter import ResultFormatter, configure_logging
from src.metrics.external_tool import score_streams
from src.metrics.plots import plot_quality
from src.metrics.quality import MetricsReport, build_report, reports_frame, skipped_row, write_report
from src.protocol.fields import HeaderDesign
from src.stego.embed import EmbedAlgorithm
from src.transport.channel import LossModel, UdpChannel, parse_address
from src.transport.rtp import depacketize

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_CAPACITY = 3
EXIT_TRANSPORT = 4

DEFAULT_RECV_PORT = 5004
DEFAULT_SEND_PORT = 5006
STARTUP_TIMEOUT_S = 10.0
# keeps answering status probes after the terminator, so a lost final OK is recovered
RECEIVER_LINGER_TICKS = 40


class StegoController:
    """
    Runs one operator action per call:

    - cmd_send / cmd_recv: live endpoints over UDP
    - cmd_simulate: the evaluation scenarios over in-memory channels
    - cmd_capacity: hidden capacity of a configuration
    - cmd_analyze: cover vs stego WAV metrics
    """

    def __init__(self, settings: Settings = Settings(), formatter: Optional[ResultFormatter] = None):
        self.settings = settings
        self.formatter = formatter or ResultFormatter()

    # -- helpers ----------------------------------------------------------

    def _require(self, name: str):
        value = getattr(self.settings, name)
        if value is None:
            raise ConfigError(f"--{name.replace('_', '-')} is required for this command")
        return value

    def _load_cover(self, path: Path, codec: CodecId) -> EncodedStream:
        clip = read_wav(path)
        if clip.nonstandard_rate:
            logger.warning("%s uses %d Hz; it will be resampled for %s", path, clip.sample_rate_hz, codec.name)
        return encode_clip(clip, codec)

    def _loss(self) -> LossModel:
        s = self.settings
        return LossModel(s.loss, s.reorder, s.seed)

    def _channel(self, default_local: int, default_peer: int) -> UdpChannel:
        s = self.settings
        local = parse_address(s.listen) if s.listen else ("0.0.0.0", default_local)
        peer = parse_address(s.peer) if s.peer else ("127.0.0.1", default_peer)
        return UdpChannel(local, peer, self._loss())

    # -- capacity ---------------------------------------------------------

    def cmd_capacity(self) -> CapacityPlan:
        payload_bytes = None
        if self.settings.payload is not None:
            payload_bytes = Path(self.settings.payload).stat().st_size
        config = self.settings.session_config()
        plan = plan_capacity(config, payload_bytes)
        self.formatter.print_mapping("Hidden capacity", plan.as_dict())
        if payload_bytes is not None:
            self.formatter.print_frame("Header designs", self._design_comparison(config, payload_bytes))
        return plan

    @staticmethod
    def _design_comparison(config: SessionConfig, payload_bytes: int) -> pl.DataFrame:
        rows = []
        for design in HeaderDesign:
            row = {"design": design.value, "net_bits_per_packet": None, "requests": None,
                   "packets": None, "responses": None, "seconds": None, "note": ""}
            try:
                other = plan_capacity(replace(config, header_design=design), payload_bytes)
            except CapacityError as exc:
                row["note"] = str(exc)
            else:
                row.update(net_bits_per_packet=other.net_bits, requests=other.requests, packets=other.packets,
                           responses=other.responses, seconds=round(other.transfer_seconds, 3))
            rows.append(row)
        return pl.DataFrame(rows)

    # -- live endpoints ---------------------------------------------------

    def _preflight(self, payload: bytes, cover: EncodedStream) -> CapacityPlan:
        config = self.settings.session_config()
        plan = plan_capacity(config, len(payload))
        # the empty terminating request needs one more round
        needed = plan.packets + plan_capacity(config, 0).packets
        available = len(cover) // config.frame_codes
        if needed > available:
            raise CapacityError(
                f"payload needs {needed} packets, the cover holds {available}",
                shortfall_bits=(needed - available) * plan.net_bits,
            )
        return plan

    def cmd_send(self) -> dict:
        s = self.settings
        cover = self._load_cover(self._require("input"), s.codec)
        payload = Path(self._require("payload")).read_bytes()
        plan = self._preflight(payload, cover)
        self.formatter.print_step(
            "Sending",
            f"{len(payload)} bytes in {plan.requests} request(s), about {plan.packets} packets"
        )
        endpoint = CovertEndpoint(s.session_config(), Role.SENDER, cover, SENDER_SSRC, keep_frames=False)
        transfer = PayloadTransfer(endpoint, payload, terminate=True)
        channel = self._channel(DEFAULT_SEND_PORT, DEFAULT_RECV_PORT)
        try:
            ticks, finished = run_live(endpoint, channel, s.pace_ms / 1000, lambda: transfer.done,
                                       idle_timeout_s=STARTUP_TIMEOUT_S, on_tick=transfer.pump)
        finally:
            channel.close()
        if s.transcript is not None:
            endpoint.write_transcript(s.transcript)
        stats = endpoint.session.stats
        summary = {
            "packets": stats.packets_sent,
            "ticks": ticks,
            "requests": f"{transfer.completed}/{len(transfer.requests)}",
            "retransmissions": stats.retransmissions,
            "resends_received": stats.resends_received,
            "probes": stats.probes,
            "dropped_by_loss_model": channel.stats.dropped,
        }
        self.formatter.print_mapping("Transcript", summary)
        if not finished:
            raise SessionError("receiver stopped answering before the transfer was acknowledged")
        self.formatter.print_success(f"{len(payload)} bytes acknowledged")
        return summary

    def cmd_recv(self) -> bytes:
        s = self.settings
        out = Path(self._require("payload"))
        cover = self._load_cover(self._require("input"), s.codec)
        config = s.session_config(dummy_seed=s.seed + 1)
        endpoint = CovertEndpoint(config, Role.RECEIVER, cover, RECEIVER_SSRC, loop_cover=True, keep_frames=False)
        channel = self._channel(DEFAULT_RECV_PORT, DEFAULT_SEND_PORT)
        self.formatter.print_step("Receiving", f"listening on {channel.local[0]}:{channel.local[1]}")
        try:
            ticks, finished = run_live(endpoint, channel, s.pace_ms / 1000, waiting_for_terminator(endpoint),
                                       idle_timeout_s=STARTUP_TIMEOUT_S, linger_ticks=RECEIVER_LINGER_TICKS)
        finally:
            channel.close()
        payload = received_payload(endpoint)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_bytes(payload)
        if endpoint.received:
            stego, gaps = depacketize(endpoint.received, config.frame_codes)
            wav_path = Path(f"{out}.wav")
            write_wav(decode_stream(stego), wav_path)
            logger.info("reassembled %d packets (%d gaps) into %s", len(endpoint.received), gaps.gaps, wav_path)
        if s.transcript is not None:
            endpoint.write_transcript(s.transcript)
        stats = endpoint.session.stats
        self.formatter.print_mapping("Transcript", {
            "packets_received": stats.packets_received,
            "ticks": ticks,
            "deliveries": stats.deliveries,
            "oks_sent": stats.oks_sent,
            "resends_sent": stats.resends_sent,
            "bytes": len(payload),
        })
        if not finished:
            raise SessionError("sender went silent before the end of the transfer")
        self.formatter.print_success(f"{len(payload)} bytes written to {out}")
        return payload

    # -- simulation -------------------------------------------------------

    def _sweep(self) -> List[tuple]:
        return [(design, codec, alg) for design in HeaderDesign for codec in CodecId for alg in EmbedAlgorithm]

    def _score(self, report: TranscriptReport) -> Optional[float]:
        if self.settings.pesq_tool is None:
            return None
        try:
            return score_streams(self.settings.pesq_tool, report.cover, report.stego)
        except ExternalToolError as exc:
            self.formatter.print_warning(f"MOS-LQO unavailable: {exc}")
            return None

    def cmd_simulate(self) -> pl.DataFrame:
        s = self.settings
        clip = read_wav(self._require("input"))
        if s.scenario is not None and s.scenario not in {int(x) for x in Scenario}:
            raise ConfigError(f"unknown scenario {s.scenario}; use 1, 2 or 3")
        scenarios = [Scenario(s.scenario)] if s.scenario is not None else list(Scenario)
        covers = {codec: encode_clip(clip, codec) for codec in CodecId}
        rows: list = []
        reports: List[MetricsReport] = []
        transcripts: List[str] = []
        for scenario in scenarios:
            self.formatter.print_step(f"Scenario {int(scenario)}", scenario.name.lower().replace("_", " "))
            for design, codec, alg in self._sweep():
                try:
                    config = s.session_config(header_design=design, codec=codec, alg=alg)
                    run = run_scenario(scenario, config, covers[codec], self._loss(), seed=s.seed)
                except (ConfigError, CapacityError) as exc:
                    self.formatter.print_warning(f"{design.value}/{codec.name}/{alg.name}: {exc}")
                    rows.append(skipped_row(codec, alg, design, int(scenario), str(exc)))
                    continue
                note = run.note if run.intact else "; ".join(filter(None, [run.note, "payload corrupted"]))
                report = build_report(codec, alg, design, run.cover, run.stego, run.hidden_bits_total,
                                      scenario=int(scenario), domain=s.domain, mos_lqo=self._score(run),
                                      note=note)
                rows.append(report)
                reports.append(report)
                transcripts.extend(run.to_lines())
        frame = reports_frame(rows)
        self.formatter.print_frame("Metrics", frame)
        if s.report is not None:
            write_report(rows, s.report)
            self.formatter.print_success(f"report written to {s.report}")
        if s.plot is not None and reports:
            plot_quality(reports, s.plot)
            self.formatter.print_success(f"plot written to {s.plot}")
        if s.transcript is not None:
            Path(s.transcript).write_text("\n".join(transcripts) + "\n")
        return frame

    # -- analysis ---------------------------------------------------------

    def cmd_analyze(self, cover_path: Path, stego_path: Path) -> MetricsReport:
        s = self.settings
        cover = self._load_cover(cover_path, s.codec)
        stego = self._load_cover(stego_path, s.codec)
        if len(cover) != len(stego):
            raise ValueError(f"cover has {len(cover)} codes, stego {len(stego)}")
        changed = int(np.unpackbits(cover.codes ^ stego.codes).sum())
        mos = score_streams(s.pesq_tool, cover, stego) if s.pesq_tool else None
        report = build_report(s.codec, s.alg, s.header, cover, stego, changed, domain=s.domain,
                              mos_lqo=mos, note="hidden bits estimated from changed bits")
        self.formatter.print_frame("Metrics", reports_frame([report]))
        if s.report is not None:
            write_report([report], s.report)
        return report


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="dotenv-style file of STEGO_* settings")
    common.add_argument("--codec", choices=[c.value for c in CodecId])
    common.add_argument("--alg", choices=[a.value for a in EmbedAlgorithm])
    common.add_argument("--header", choices=[d.value for d in HeaderDesign])
    common.add_argument("--embedding", choices=["fixed", "chained"])
    common.add_argument("--offset", type=int, help="initial header offset in code units")
    common.add_argument("--frame", type=int, help="code units per packet")
    common.add_argument("--loss", type=float, help="packet loss probability")
    common.add_argument("--reorder", type=float, help="packet reorder probability")
    common.add_argument("--seed", type=int)
    common.add_argument("--ack-every", type=int, dest="ack_every", help="acknowledge every N segments")
    common.add_argument("--offset-seed", type=int, dest="offset_seed",
                        help="seed of the per-packet header offset schedule (default: fixed offset)")
    common.add_argument("--resend-limit", type=int, dest="resend_limit",
                        help="resend attempts without progress before a request is abandoned")
    common.add_argument("--input", help="cover WAV file")
    common.add_argument("--payload", help="payload file (read by send, written by recv)")
    common.add_argument("--peer", help="HOST:PORT of the other endpoint")
    common.add_argument("--listen", help="local HOST:PORT to bind")
    common.add_argument("--report", help="CSV metrics report path")
    common.add_argument("--pesq-tool", dest="pesq_tool", help="external MOS-LQO scorer command")
    common.add_argument("--scenario", type=int, choices=[1, 2, 3])
    common.add_argument("--plot", help="SNR/PSNR plot path")
    common.add_argument("--transcript", help="transcript output path")
    common.add_argument("--domain", choices=["code", "pcm"], help="metric domain")
    common.add_argument("--pace-ms", type=int, dest="pace_ms", help="milliseconds between live packets")
    common.add_argument("--verbose", action="store_true", help="Enable verbose output")

    parser = argparse.ArgumentParser(
        description="Micro protocol covert channel over RTP voice streams"
    )
    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("send", parents=[common], help="stream a cover and send a payload over UDP")
    commands.add_parser("recv", parents=[common], help="receive a payload over UDP")
    commands.add_parser("simulate", parents=[common], help="run the evaluation scenarios in-process")
    commands.add_parser("capacity", parents=[common], help="hidden capacity of a configuration")
    analyze = commands.add_parser("analyze", parents=[common], help="metrics of a cover/stego WAV pair")
    analyze.add_argument("cover", help="cover WAV")
    analyze.add_argument("stego", help="stego WAV")
    return parser


def run(args: argparse.Namespace, formatter: ResultFormatter) -> int:
    """Run one parsed command and map failures to exit codes."""
    try:
        settings = resolve_settings(vars(args), args.config)
        controller = StegoController(settings, formatter)
        if args.command == "send":
            controller.cmd_send()
        elif args.command == "recv":
            controller.cmd_recv()
        elif args.command == "simulate":
            controller.cmd_simulate()
        elif args.command == "capacity":
            controller.cmd_capacity()
        else:
            controller.cmd_analyze(Path(args.cover), Path(args.stego))
        return EXIT_OK
    except ConfigError as e:
        formatter.print_error(str(e))
        return EXIT_CONFIG
    except CapacityError as e:
        detail = f" (short by {e.shortfall_bits} bits)" if e.shortfall_bits else ""
        progress = f"; {e.progress}" if e.progress else ""
        formatter.print_error(f"{e}{detail}{progress}")
        return EXIT_CAPACITY
    except (TransportError, SessionError) as e:
        formatter.print_error(str(e))
        return EXIT_TRANSPORT
    except (StegoError, ValueError, OSError) as e:
        formatter.print_error(str(e))
        return EXIT_FAILURE


def main(argv: Optional[Sequence[str]] = None) -> int:
    """CLI entry point."""
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    return run(args, ResultFormatter())


if __name__ == "__main__":
    sys.exit(main())
