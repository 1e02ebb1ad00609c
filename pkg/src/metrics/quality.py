"""
Cover-vs-stego degradation metrics and report tables.

Metrics are computed on codec code values by default; MetricDomain.PCM
compares the decoded 16-bit samples instead. A stream pair without any
difference yields the IDENTICAL sentinel for SNR and PSNR.
"""
import enum
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional

import numpy as np
import polars as pl

from src.audio.codecs import CodecId, EncodedStream, decode_stream
from src.errors import CodecMismatchError
from src.protocol.fields import HeaderDesign
from src.stego.embed import EmbedAlgorithm

logger = logging.getLogger(__name__)

IDENTICAL = math.inf
PCM_PEAK = 32767

REPORT_COLUMNS = [
    "codec", "algorithm", "hidden_bits_pct", "mse", "snr_db", "psnr_db", "mos_lqo",
    "header", "scenario", "note",
]


class MetricDomain(str, enum.Enum):
    CODE = "code"
    PCM = "pcm"


def _aligned(cover: EncodedStream, stego: EncodedStream, domain: MetricDomain):
    if cover.codec is not stego.codec:
        raise CodecMismatchError(f"cannot compare {cover.codec.name} with {stego.codec.name}")
    if len(cover) != len(stego):
        raise ValueError(f"length mismatch: {len(cover)} vs {len(stego)} codes")
    if len(cover) == 0:
        raise ValueError("empty streams")
    if domain is MetricDomain.PCM:
        return (decode_stream(cover).samples.astype(np.float64),
                decode_stream(stego).samples.astype(np.float64))
    return cover.codes.astype(np.float64), stego.codes.astype(np.float64)


def peak_value(codec: CodecId, domain: MetricDomain = MetricDomain.CODE) -> int:
    if domain is MetricDomain.PCM:
        return PCM_PEAK
    return (1 << codec.bits_per_code) - 1


def mse(cover: EncodedStream, stego: EncodedStream, domain: MetricDomain = MetricDomain.CODE) -> float:
    c, s = _aligned(cover, stego, domain)
    return float(np.mean((c - s) ** 2))


def snr_db(cover: EncodedStream, stego: EncodedStream, domain: MetricDomain = MetricDomain.CODE) -> float:
    c, s = _aligned(cover, stego, domain)
    signal = float(np.sum(c ** 2))
    if signal == 0:
        raise ValueError("cover carries no signal power")
    noise = float(np.sum((c - s) ** 2))
    if noise == 0:
        return IDENTICAL
    return 10 * math.log10(signal / noise)


def psnr_from_mse(mse_value: float, peak: float) -> float:
    if mse_value == 0:
        return IDENTICAL
    return 10 * math.log10(peak ** 2 / mse_value)


def psnr_db(cover: EncodedStream, stego: EncodedStream, domain: MetricDomain = MetricDomain.CODE) -> float:
    c, s = _aligned(cover, stego, domain)
    if not np.any(c):
        raise ValueError("cover carries no signal power")
    return psnr_from_mse(float(np.mean((c - s) ** 2)), peak_value(cover.codec, domain))


def psnr_snr_gap_db(cover: EncodedStream, domain: MetricDomain = MetricDomain.CODE) -> float:
    """PSNR minus SNR for any stego version of this cover: 10*log10(peak^2 * N / sum(cover^2))."""
    c, _ = _aligned(cover, cover, domain)
    return 10 * math.log10(peak_value(cover.codec, domain) ** 2 * c.size / float(np.sum(c ** 2)))


@dataclass(frozen=True)
class MetricsReport:
    codec: CodecId
    alg: EmbedAlgorithm
    header_design: HeaderDesign
    hidden_fraction: float
    mse: float
    snr_db: float
    psnr_db: float
    mos_lqo: Optional[float] = None
    scenario: Optional[int] = None
    domain: MetricDomain = MetricDomain.CODE
    note: str = ""

    @property
    def identical(self) -> bool:
        return self.mse == 0

    def as_row(self) -> dict:
        return {
            "codec": self.codec.name,
            "algorithm": self.alg.name,
            "hidden_bits_pct": format_percent(self.hidden_fraction),
            "mse": f"{self.mse:.6f}",
            "snr_db": format_db(self.snr_db),
            "psnr_db": format_db(self.psnr_db),
            "mos_lqo": "n/a" if self.mos_lqo is None else f"{self.mos_lqo:.3f}",
            "header": self.header_design.value,
            "scenario": "" if self.scenario is None else str(self.scenario),
            "note": self.note,
        }


def format_percent(fraction: float) -> str:
    return f"{100 * fraction:.3f}%"


def format_db(value: float) -> str:
    return "identical" if value == IDENTICAL else f"{value:.3f}"


def build_report(codec: CodecId, alg: EmbedAlgorithm, header_design: HeaderDesign,
                 cover: EncodedStream, stego: EncodedStream, hidden_bits_total: int,
                 scenario: Optional[int] = None, domain: MetricDomain = MetricDomain.CODE,
                 mos_lqo: Optional[float] = None, note: str = "") -> MetricsReport:
    return MetricsReport(
        codec=codec,
        alg=alg,
        header_design=header_design,
        hidden_fraction=hidden_bits_total / stego.total_bits,
        mse=mse(cover, stego, domain),
        snr_db=snr_db(cover, stego, domain),
        psnr_db=psnr_db(cover, stego, domain),
        mos_lqo=mos_lqo,
        scenario=scenario,
        domain=domain,
        note=note,
    )


def skipped_row(codec: CodecId, alg: EmbedAlgorithm, header_design: HeaderDesign,
                scenario: Optional[int], reason: str) -> dict:
    """A warning row for a configuration that could not run."""
    row = {column: "" for column in REPORT_COLUMNS}
    row.update(codec=codec.name, algorithm=alg.name, header=header_design.value,
               scenario="" if scenario is None else str(scenario), note=f"skipped: {reason}")
    return row


def reports_frame(rows: Iterable) -> pl.DataFrame:
    """Report table in the published column order; accepts reports or prepared row dicts."""
    data: List[dict] = [r.as_row() if isinstance(r, MetricsReport) else r for r in rows]
    return pl.from_dicts(data, schema={column: pl.Utf8 for column in REPORT_COLUMNS})


def write_report(rows: Iterable, path: Path) -> pl.DataFrame:
    frame = reports_frame(rows)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    frame.write_csv(path)
    logger.info("wrote %d report rows to %s", frame.height, path)
    return frame


def read_report(path: Path) -> pl.DataFrame:
    # every column is text; empty cells come back as empty strings
    return pl.read_csv(path, infer_schema_length=0).fill_null("")
