"""
WAV reading/writing and the in-memory cover clip.

Only linear PCM (format tag 1) with 8 or 16 bit samples is accepted. Stereo
input is folded to mono, 8-bit input is widened to the 16-bit range.
"""
import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from src.errors import UnsupportedFormatError, WavFormatError

logger = logging.getLogger(__name__)

CODEC_RATES = (8000, 11025)
WAVE_FORMAT_PCM = 1


@dataclass(frozen=True, eq=False)
class PcmClip:
    """Mono audio; samples always live in the signed 16-bit range."""

    sample_rate_hz: int
    bit_depth: int
    samples: np.ndarray

    def __post_init__(self):
        if self.sample_rate_hz <= 0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate_hz}")
        if self.bit_depth not in (8, 16):
            raise ValueError(f"bit depth must be 8 or 16, got {self.bit_depth}")
        samples = np.asarray(self.samples)
        if samples.ndim != 1:
            raise ValueError("PcmClip holds mono samples only")
        if samples.size and (samples.min() < -32768 or samples.max() > 32767):
            raise ValueError("samples outside the 16-bit range")
        samples = samples.astype(np.int16, copy=True)
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return int(self.samples.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PcmClip):
            return NotImplemented
        return (
            self.sample_rate_hz == other.sample_rate_hz
            and self.bit_depth == other.bit_depth
            and np.array_equal(self.samples, other.samples)
        )

    @property
    def duration_s(self) -> float:
        return len(self) / self.sample_rate_hz

    @property
    def nonstandard_rate(self) -> bool:
        return self.sample_rate_hz not in CODEC_RATES


def _parse_chunks(blob: bytes):
    if len(blob) < 12 or blob[0:4] != b"RIFF" or blob[8:12] != b"WAVE":
        raise WavFormatError("missing RIFF/WAVE signature")
    pos = 12
    chunks = {}
    while pos + 8 <= len(blob):
        chunk_id = blob[pos:pos + 4]
        (size,) = struct.unpack("<I", blob[pos + 4:pos + 8])
        body = blob[pos + 8:pos + 8 + size]
        if len(body) < size and chunk_id != b"data":
            raise WavFormatError(f"chunk {chunk_id!r} truncated")
        chunks.setdefault(chunk_id, body)
        pos += 8 + size + (size & 1)
    return chunks


def read_wav(path: Union[str, Path]) -> PcmClip:
    """Read a linear PCM WAV file into a mono clip."""
    blob = Path(path).read_bytes()
    chunks = _parse_chunks(blob)
    fmt = chunks.get(b"fmt ")
    if fmt is None or len(fmt) < 16:
        raise WavFormatError("missing or short fmt chunk")
    if b"data" not in chunks:
        raise WavFormatError("missing data chunk")

    tag, channels, rate, _byte_rate, block_align, bits = struct.unpack("<HHIIHH", fmt[:16])
    if tag != WAVE_FORMAT_PCM:
        raise UnsupportedFormatError(f"format tag {tag:#06x} is not linear PCM")
    if bits not in (8, 16):
        raise UnsupportedFormatError(f"{bits}-bit samples are not supported")
    if channels < 1 or block_align != channels * bits // 8:
        raise WavFormatError("inconsistent channel count / block alignment")

    data = chunks[b"data"]
    frames = len(data) // block_align
    data = data[: frames * block_align]
    if bits == 8:
        raw = np.frombuffer(data, dtype=np.uint8).astype(np.int32)
        raw = (raw - 128) * 256
    else:
        raw = np.frombuffer(data, dtype="<i2").astype(np.int32)

    raw = raw.reshape(frames, channels)
    if channels == 1:
        mono = raw[:, 0]
    else:
        # Mean rounded toward zero.
        mono = np.trunc(raw.sum(axis=1) / channels).astype(np.int32)

    clip = PcmClip(rate, bits, mono)
    if clip.nonstandard_rate:
        logger.warning("%s: sample rate %d Hz is not one of %s", path, rate, CODEC_RATES)
    logger.debug("read %s: %d samples, %d Hz, %d bit, %d channel(s)", path, len(clip), rate, bits, channels)
    return clip


def wav_bytes(clip: PcmClip) -> bytes:
    """Canonical 44-byte-header PCM WAV image of a clip."""
    if clip.bit_depth == 8:
        body = ((clip.samples.astype(np.int32) // 256) + 128).astype(np.uint8).tobytes()
    else:
        body = clip.samples.astype("<i2").tobytes()
    block_align = clip.bit_depth // 8
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(body), b"WAVE",
        b"fmt ", 16, WAVE_FORMAT_PCM, 1,
        clip.sample_rate_hz, clip.sample_rate_hz * block_align, block_align, clip.bit_depth,
        b"data", len(body),
    )
    return header + body


def write_wav(clip: PcmClip, path: Union[str, Path]) -> None:
    """Write a clip as a mono PCM WAV file; OSError propagates for unwritable paths."""
    Path(path).write_bytes(wav_bytes(clip))


def resample_nearest(clip: PcmClip, target_rate_hz: int) -> PcmClip:
    """Nearest-neighbour (sample and hold) rate change, no filtering."""
    if target_rate_hz <= 0:
        raise ValueError(f"target rate must be positive, got {target_rate_hz}")
    source = clip.sample_rate_hz
    if target_rate_hz == source:
        return clip
    out_len = int(np.floor(len(clip) * target_rate_hz / source + 0.5))
    idx = (np.arange(out_len, dtype=np.int64) * source) // target_rate_hz
    idx = np.minimum(idx, max(len(clip) - 1, 0))
    samples = clip.samples[idx] if len(clip) else np.zeros(0, dtype=np.int16)
    return PcmClip(target_rate_hz, clip.bit_depth, samples)
