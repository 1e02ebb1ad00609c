"""
Carrier codecs: G.711 mu-law ("ULAW", 8 bit codes) and IMA/DVI ADPCM
("DVI", 4 bit codes).

Embedding happens on the code units produced here, after compression.
"""
import enum
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from src.audio.audio_io import PcmClip, resample_nearest
from src.errors import CodecMismatchError


class CodecId(str, enum.Enum):
    ULAW = "ulaw"
    DVI = "dvi"

    @property
    def bits_per_code(self) -> int:
        return 8 if self is CodecId.ULAW else 4

    @property
    def nominal_rate_hz(self) -> int:
        return 8000 if self is CodecId.ULAW else 11025

    @property
    def accepted_rates(self) -> tuple:
        return (8000,) if self is CodecId.ULAW else (11000, 11025)

    @property
    def rtp_payload_type(self) -> int:
        return 0 if self is CodecId.ULAW else 5

    @property
    def silence_code(self) -> int:
        return 0xFF if self is CodecId.ULAW else 0x0


@dataclass(frozen=True, eq=False)
class EncodedStream:
    """Codec-domain code units, the substrate hidden bits are written into."""

    codec: CodecId
    codes: np.ndarray
    sample_rate_hz: int = 0

    def __post_init__(self):
        codes = np.asarray(self.codes)
        if codes.ndim != 1:
            raise ValueError("codes must be one-dimensional")
        if codes.size and (codes.min() < 0 or codes.max() >= (1 << self.codec.bits_per_code)):
            raise ValueError(f"code does not fit {self.codec.bits_per_code} bits")
        codes = codes.astype(np.uint8, copy=True)
        codes.flags.writeable = False
        object.__setattr__(self, "codes", codes)
        if not self.sample_rate_hz:
            object.__setattr__(self, "sample_rate_hz", self.codec.nominal_rate_hz)

    @property
    def bits_per_code(self) -> int:
        return self.codec.bits_per_code

    @property
    def total_bits(self) -> int:
        return len(self) * self.bits_per_code

    def __len__(self) -> int:
        return int(self.codes.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EncodedStream):
            return NotImplemented
        return self.codec is other.codec and np.array_equal(self.codes, other.codes)

    def with_codes(self, codes: np.ndarray) -> "EncodedStream":
        return EncodedStream(self.codec, codes, self.sample_rate_hz)

    def slice(self, start: int, stop: int) -> "EncodedStream":
        return self.with_codes(self.codes[start:stop])

    @classmethod
    def concat(cls, parts) -> "EncodedStream":
        parts = list(parts)
        if not parts:
            raise ValueError("nothing to concatenate")
        first = parts[0]
        if any(p.codec is not first.codec for p in parts):
            raise CodecMismatchError("cannot concatenate streams of different codecs")
        return first.with_codes(np.concatenate([p.codes for p in parts]))


# ---------------------------------------------------------------------------
# G.711 mu-law
# ---------------------------------------------------------------------------

ULAW_BIAS = 0x84
ULAW_CLIP = 32635
# Segment (exponent) of a biased magnitude, indexed by magnitude >> 7.
_SEGMENT = np.array([0] + [int(np.floor(np.log2(v))) for v in range(1, 256)], dtype=np.int32)


def ulaw_encode(clip: PcmClip) -> EncodedStream:
    pcm = clip.samples.astype(np.int32)
    sign = np.where(pcm < 0, 0x80, 0)
    magnitude = np.minimum(np.abs(pcm), ULAW_CLIP) + ULAW_BIAS
    exponent = _SEGMENT[(magnitude >> 7) & 0xFF]
    mantissa = (magnitude >> (exponent + 3)) & 0x0F
    codes = ~(sign | (exponent << 4) | mantissa) & 0xFF
    return EncodedStream(CodecId.ULAW, codes, clip.sample_rate_hz)


def ulaw_decode_codes(codes: np.ndarray) -> np.ndarray:
    u = ~codes.astype(np.int32) & 0xFF
    exponent = (u >> 4) & 0x07
    mantissa = u & 0x0F
    magnitude = (((mantissa << 3) + ULAW_BIAS) << exponent) - ULAW_BIAS
    return np.where(u & 0x80, -magnitude, magnitude)


def ulaw_decode(stream: EncodedStream) -> PcmClip:
    if stream.codec is not CodecId.ULAW:
        raise CodecMismatchError(f"expected a ULAW stream, got {stream.codec.name}")
    return PcmClip(stream.sample_rate_hz, 16, ulaw_decode_codes(stream.codes))


# ---------------------------------------------------------------------------
# IMA / DVI ADPCM
# ---------------------------------------------------------------------------

IMA_STEPS = (
    7, 8, 9, 10, 11, 12, 13, 14, 16, 17, 19, 21, 23, 25, 28, 31, 34, 37, 41, 45,
    50, 55, 60, 66, 73, 80, 88, 97, 107, 118, 130, 143, 157, 173, 190, 209, 230,
    253, 279, 307, 337, 371, 408, 449, 494, 544, 598, 658, 724, 796, 876, 963,
    1060, 1166, 1282, 1411, 1552, 1707, 1878, 2066, 2272, 2499, 2749, 3024, 3327,
    3660, 4026, 4428, 4871, 5358, 5894, 6484, 7132, 7845, 8630, 9493, 10442,
    11487, 12635, 13899, 15289, 16818, 18500, 20350, 22385, 24623, 27086, 29794,
    32767,
)
IMA_INDEX_ADJUST = (-1, -1, -1, -1, 2, 4, 6, 8)


@dataclass(frozen=True)
class AdpcmState:
    predictor: int = 0
    step_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "predictor", max(-32768, min(32767, int(self.predictor))))
        object.__setattr__(self, "step_index", max(0, min(88, int(self.step_index))))


def _advance(predictor: int, index: int, code: int) -> Tuple[int, int]:
    """Apply one 4-bit code to the predictor; shared by encoder and decoder."""
    step = IMA_STEPS[index]
    vpdiff = step >> 3
    if code & 4:
        vpdiff += step
    if code & 2:
        vpdiff += step >> 1
    if code & 1:
        vpdiff += step >> 2
    predictor = predictor - vpdiff if code & 8 else predictor + vpdiff
    predictor = max(-32768, min(32767, predictor))
    index = max(0, min(88, index + IMA_INDEX_ADJUST[code & 7]))
    return predictor, index


def dvi_encode(clip: PcmClip, initial: AdpcmState = AdpcmState()) -> Tuple[EncodedStream, AdpcmState]:
    predictor, index = initial.predictor, initial.step_index
    codes = np.empty(len(clip), dtype=np.uint8)
    for i, sample in enumerate(clip.samples.tolist()):
        step = IMA_STEPS[index]
        diff = sample - predictor
        code = 0
        if diff < 0:
            code = 8
            diff = -diff
        if diff >= step:
            code |= 4
            diff -= step
        if diff >= step >> 1:
            code |= 2
            diff -= step >> 1
        if diff >= step >> 2:
            code |= 1
        codes[i] = code
        predictor, index = _advance(predictor, index, code)
    return EncodedStream(CodecId.DVI, codes, clip.sample_rate_hz), AdpcmState(predictor, index)


def dvi_decode(stream: EncodedStream, initial: AdpcmState = AdpcmState()) -> Tuple[PcmClip, AdpcmState]:
    if stream.codec is not CodecId.DVI:
        raise CodecMismatchError(f"expected a DVI stream, got {stream.codec.name}")
    predictor, index = initial.predictor, initial.step_index
    out = np.empty(len(stream), dtype=np.int32)
    for i, code in enumerate(stream.codes.tolist()):
        predictor, index = _advance(predictor, index, code)
        out[i] = predictor
    return PcmClip(stream.sample_rate_hz, 16, out), AdpcmState(predictor, index)


# ---------------------------------------------------------------------------
# Codec selection
# ---------------------------------------------------------------------------

def encode_clip(clip: PcmClip, codec: CodecId) -> EncodedStream:
    """Encode with a fresh coder state, resampling to the codec's rate first."""
    if clip.sample_rate_hz not in codec.accepted_rates:
        clip = resample_nearest(clip, codec.nominal_rate_hz)
    if codec is CodecId.ULAW:
        return ulaw_encode(clip)
    stream, _ = dvi_encode(clip)
    return stream


def decode_stream(stream: EncodedStream) -> PcmClip:
    if stream.codec is CodecId.ULAW:
        return ulaw_decode(stream)
    clip, _ = dvi_decode(stream)
    return clip
