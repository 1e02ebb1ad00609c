"""
Tests for settings resolution, the controller commands and the CLI exit codes.
"""
import io
import logging
import os
import stat
import sys

import numpy as np
import pytest
from rich.console import Console

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from src.audio.audio_io import PcmClip, write_wav
from src.audio.codecs import CodecId, decode_stream, encode_clip
from src.config import Settings, load_config_file, parse_value, resolve_settings
from src.errors import ConfigError
from src.formatters.result_formatter import ResultFormatter
from src.metrics.quality import REPORT_COLUMNS, read_report
from src.protocol.fields import HeaderDesign
from src.stego.embed import EmbedAlgorithm, PlacementMode, embed_bits
from src.stego_controller import (
    EXIT_CAPACITY,
    EXIT_CONFIG,
    EXIT_FAILURE,
    EXIT_OK,
    StegoController,
    build_parser,
    main,
)


# ---------------------------------------------------------------------------
# Fixtures
# ---------------------------------------------------------------------------

def _sine_clip(seconds=2.0, rate=8000):
    t = np.arange(int(rate * seconds)) / rate
    return PcmClip(rate, 16, np.round(5000 * np.sin(2 * np.pi * 330 * t)).astype(np.int16))


@pytest.fixture
def cover_wav(tmp_path):
    path = tmp_path / "cover.wav"
    write_wav(_sine_clip(), path)
    return path


@pytest.fixture
def formatter():
    return ResultFormatter(Console(file=io.StringIO(), width=200))


def _output(formatter):
    return formatter.console.file.getvalue()


# ---------------------------------------------------------------------------
# Settings
# ---------------------------------------------------------------------------

class TestSettings:
    def test_defaults(self):
        settings = resolve_settings({})
        assert settings == Settings()
        config = settings.session_config()
        assert config.codec is CodecId.ULAW
        assert config.frame_codes == 160

    def test_file_then_flags(self, tmp_path):
        path = tmp_path / "stego.env"
        path.write_text("STEGO_CODEC=dvi\nSTEGO_FRAME=220\nSTEGO_ALG=LSB2\n")
        settings = resolve_settings({"frame": 320, "loss": None}, path)
        assert settings.codec is CodecId.DVI
        assert settings.alg is EmbedAlgorithm.LSB2
        assert settings.frame == 320
        assert settings.loss == 0.0

    def test_unknown_key_warns(self, tmp_path, caplog):
        path = tmp_path / "stego.env"
        path.write_text("STEGO_COLOUR=blue\nOTHER=1\nSTEGO_SEED=7\n")
        with caplog.at_level(logging.WARNING, logger="src.config"):
            values = load_config_file(path)
        assert values == {"seed": 7}
        assert "STEGO_COLOUR" in caplog.text
        assert "OTHER" in caplog.text

    def test_bad_values(self, tmp_path):
        with pytest.raises(ConfigError):
            parse_value("codec", "gsm")
        with pytest.raises(ConfigError):
            parse_value("frame", "many")
        with pytest.raises(ConfigError):
            parse_value("alg", "lsb9")
        with pytest.raises(ConfigError):
            load_config_file(tmp_path / "missing.env")

    def test_negative_offset(self):
        with pytest.raises(ConfigError):
            Settings(offset=-1).session_config()

    def test_parsed_flags(self):
        args = build_parser().parse_args(["capacity", "--codec", "dvi", "--alg", "lsb2", "--embedding", "chained",
                                          "--ack-every", "4", "--header", "dynamic"])
        config = resolve_settings(vars(args)).session_config()
        assert config.codec is CodecId.DVI
        assert config.alg is EmbedAlgorithm.LSB2
        assert config.placement.mode is PlacementMode.CHAINED
        assert config.ack_every_n == 4
        assert config.header_design is HeaderDesign.DYNAMIC

    def test_offset_seed_and_resend_limit_default(self):
        config = resolve_settings({}).session_config()
        assert config.schedule_seed is None
        assert config.resend_limit == 16

    def test_offset_seed_and_resend_limit_from_file(self, tmp_path):
        path = tmp_path / "stego.env"
        path.write_text("STEGO_OFFSET_SEED=9\nSTEGO_RESEND_LIMIT=4\n")
        config = resolve_settings({}, path).session_config()
        assert config.schedule_seed == 9
        assert config.resend_limit == 4

    def test_offset_seed_and_resend_limit_flags_win(self, tmp_path):
        path = tmp_path / "stego.env"
        path.write_text("STEGO_OFFSET_SEED=9\nSTEGO_RESEND_LIMIT=4\n")
        args = build_parser().parse_args(["capacity", "--offset-seed", "21", "--resend-limit", "2"])
        config = resolve_settings(vars(args), path).session_config()
        assert config.schedule_seed == 21
        assert config.resend_limit == 2

    def test_negative_resend_limit(self):
        with pytest.raises(ConfigError):
            Settings(resend_limit=-1).session_config()


# ---------------------------------------------------------------------------
# Capacity
# ---------------------------------------------------------------------------

class TestCapacityCommand:
    def test_plan(self, formatter):
        plan = StegoController(Settings(), formatter).cmd_capacity()
        assert plan.net_bits == 145
        assert "net_bits_per_second" in _output(formatter)

    def test_payload_file(self, tmp_path, formatter):
        payload = tmp_path / "p.bin"
        payload.write_bytes(bytes(180))
        plan = StegoController(Settings(payload=payload), formatter).cmd_capacity()
        assert plan.packets == 11
        out = _output(formatter)
        assert "Header designs" in out
        assert "dynamic" in out

    def test_exit_codes(self):
        assert main(["capacity"]) == EXIT_OK
        assert main(["capacity", "--codec", "dvi", "--alg", "lsb6"]) == EXIT_CONFIG
        assert main(["capacity", "--frame", "10"]) == EXIT_CAPACITY
        assert main(["capacity", "--offset", "40", "--frame", "480"]) == EXIT_CONFIG

    def test_unknown_scenario_rejected_by_parser(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["simulate", "--scenario", "4"])


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------

class TestSimulateCommand:
    def test_scenario_rows(self, cover_wav, tmp_path, formatter):
        report = tmp_path / "report.csv"
        frame = StegoController(Settings(input=cover_wav, scenario=1, report=report), formatter).cmd_simulate()
        assert frame.columns == REPORT_COLUMNS
        assert frame.height == 2 * 2 * 4
        skipped = frame.filter(frame["note"].str.starts_with("skipped"))
        assert skipped.height == 2
        assert set(skipped["algorithm"].to_list()) == {"LSB6"}
        assert set(skipped["codec"].to_list()) == {"DVI"}
        assert read_report(report).equals(frame)

    def test_dummy_rate(self, cover_wav, formatter):
        frame = StegoController(Settings(input=cover_wav, scenario=1, frame=480), formatter).cmd_simulate()
        row = frame.filter((frame["codec"] == "ULAW") & (frame["header"] == "static")
                           & (frame["algorithm"] == "LSB1"))
        assert row["hidden_bits_pct"].to_list() == ["0.417%"]

    def test_bulk_skips_what_does_not_fit(self, cover_wav, formatter):
        frame = StegoController(Settings(input=cover_wav, scenario=3), formatter).cmd_simulate()
        dynamic = frame.filter(frame["header"] == "dynamic")
        assert all(note.startswith("skipped") for note in dynamic["note"].to_list())
        ulaw = frame.filter((frame["header"] == "static") & (frame["codec"] == "ULAW")
                            & (frame["algorithm"] == "LSB1"))
        assert float(ulaw["mse"][0]) > 0
        assert "!" in _output(formatter)

    def test_deterministic_reports(self, cover_wav, tmp_path):
        paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
        for path in paths:
            code = main(["simulate", "--input", str(cover_wav), "--scenario", "2", "--seed", "5",
                         "--report", str(path)])
            assert code == EXIT_OK
        assert paths[0].read_text() == paths[1].read_text()

    def test_plot_and_transcript(self, cover_wav, tmp_path, formatter):
        settings = Settings(input=cover_wav, scenario=2, plot=tmp_path / "q.png",
                            transcript=tmp_path / "t.txt")
        StegoController(settings, formatter).cmd_simulate()
        assert (tmp_path / "q.png").stat().st_size > 0
        lines = (tmp_path / "t.txt").read_text().splitlines()
        assert lines[0].startswith("# scenario=2")
        assert any("dir=tx" in line for line in lines)

    def test_input_required(self):
        assert main(["simulate"]) == EXIT_CONFIG


def _scorer(tmp_path, body):
    path = tmp_path / "scorer"
    path.write_text("#!/bin/sh\n" + body + "\n")
    path.chmod(path.stat().st_mode | stat.S_IXUSR)
    return str(path)


@pytest.mark.skipif(sys.platform == "win32", reason="needs a POSIX shell")
class TestExternalScorer:
    def test_simulate_report_carries_score(self, cover_wav, tmp_path, formatter):
        tool = _scorer(tmp_path, 'echo "Prediction (Raw MOS, MOS-LQO): = 2.154 3.875"')
        report = tmp_path / "report.csv"
        StegoController(Settings(input=cover_wav, scenario=1, report=report, pesq_tool=tool),
                        formatter).cmd_simulate()
        frame = read_report(report)
        ran = frame.filter(~frame["note"].str.starts_with("skipped"))
        assert ran.height == 14
        assert set(ran["mos_lqo"].to_list()) == {"3.875"}

    def test_simulate_without_scorer(self, cover_wav, tmp_path, formatter):
        report = tmp_path / "report.csv"
        StegoController(Settings(input=cover_wav, scenario=1, report=report), formatter).cmd_simulate()
        frame = read_report(report)
        ran = frame.filter(~frame["note"].str.starts_with("skipped"))
        assert set(ran["mos_lqo"].to_list()) == {"n/a"}

    def test_failing_scorer_falls_back(self, cover_wav, tmp_path, formatter):
        tool = _scorer(tmp_path, "echo broken >&2\nexit 3")
        report = tmp_path / "report.csv"
        StegoController(Settings(input=cover_wav, scenario=1, report=report, pesq_tool=tool),
                        formatter).cmd_simulate()
        frame = read_report(report)
        ran = frame.filter(~frame["note"].str.starts_with("skipped"))
        assert set(ran["mos_lqo"].to_list()) == {"n/a"}
        assert "MOS-LQO unavailable" in _output(formatter)

    def test_analyze_report_carries_score(self, cover_wav, tmp_path, formatter):
        tool = _scorer(tmp_path, "echo 4.1")
        report = tmp_path / "analysis.csv"
        result = StegoController(Settings(report=report, pesq_tool=tool), formatter).cmd_analyze(cover_wav, cover_wav)
        assert result.mos_lqo == pytest.approx(4.1)
        assert read_report(report)["mos_lqo"].to_list() == ["4.100"]


# ---------------------------------------------------------------------------
# Analysis and live preconditions
# ---------------------------------------------------------------------------

class TestAnalyzeCommand:
    def test_stego_file(self, cover_wav, tmp_path, formatter):
        cover = encode_clip(_sine_clip(), CodecId.ULAW)
        bits = np.random.default_rng(1).integers(0, 2, 800).astype(np.uint8)
        stego_wav = tmp_path / "stego.wav"
        write_wav(decode_stream(embed_bits(cover, EmbedAlgorithm.LSB1, 100, bits)), stego_wav)
        report = StegoController(Settings(), formatter).cmd_analyze(cover_wav, stego_wav)
        assert report.mse > 0
        assert 0 < report.hidden_fraction < 800 / cover.total_bits
        assert "estimated" in report.note

    def test_identical_files(self, cover_wav, formatter):
        report = StegoController(Settings(), formatter).cmd_analyze(cover_wav, cover_wav)
        assert report.identical
        assert "identical" in _output(formatter)

    def test_length_mismatch(self, cover_wav, tmp_path):
        short = tmp_path / "short.wav"
        write_wav(_sine_clip(seconds=1.0), short)
        assert main(["analyze", str(cover_wav), str(short)]) == EXIT_FAILURE


class TestLivePreconditions:
    def test_missing_input(self):
        assert main(["send"]) == EXIT_CONFIG
        assert main(["recv"]) == EXIT_CONFIG

    def test_cover_too_short(self, cover_wav, tmp_path):
        payload = tmp_path / "big.bin"
        payload.write_bytes(bytes(10_000))
        code = main(["send", "--input", str(cover_wav), "--payload", str(payload)])
        assert code == EXIT_CAPACITY
