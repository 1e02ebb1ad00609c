"""
Bit-plane embedding of hidden bits into codec code units.

LSB1 writes bit 0, LSB2 bits 1 then 0, MSB the top bit of the code and LSB6
("LSB6Enh") bit 5 of 8-bit codes. Offsets are counted in code units.
Embedding never mutates its input stream.
"""
import enum
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from src.audio.codecs import EncodedStream
from src.errors import CapacityError, UnsupportedCombinationError
from src.stego.bits import BitString, empty


class EmbedAlgorithm(str, enum.Enum):
    LSB1 = "lsb1"
    LSB2 = "lsb2"
    MSB = "msb"
    LSB6 = "lsb6"

    def planes(self, bits_per_code: int) -> Tuple[int, ...]:
        """Targeted bit positions, in the order payload bits fill them."""
        if self is EmbedAlgorithm.LSB1:
            return (0,)
        if self is EmbedAlgorithm.LSB2:
            return (1, 0)
        if self is EmbedAlgorithm.MSB:
            return (bits_per_code - 1,)
        if bits_per_code != 8:
            raise UnsupportedCombinationError(
                f"LSB6 needs 8-bit codes, the stream has {bits_per_code}-bit codes"
            )
        return (5,)

    def bits_targeted(self, bits_per_code: int) -> int:
        return len(self.planes(bits_per_code))


class PlacementMode(str, enum.Enum):
    FIXED = "fixed"
    CHAINED = "chained"


@dataclass(frozen=True)
class Placement:
    mode: PlacementMode = PlacementMode.FIXED
    initial_offset_codes: int = 0

    def __post_init__(self):
        if self.initial_offset_codes < 0:
            raise ValueError("initial offset must be >= 0")

    def check(self, packet_codes: int) -> None:
        if self.initial_offset_codes >= packet_codes:
            raise ValueError(
                f"initial offset {self.initial_offset_codes} outside a {packet_codes}-code packet"
            )


def check_combination(bits_per_code: int, alg: EmbedAlgorithm) -> None:
    alg.planes(bits_per_code)


def capacity(stream: EncodedStream, alg: EmbedAlgorithm) -> int:
    """Hidden bits the whole stream can carry."""
    return len(stream) * alg.bits_targeted(stream.bits_per_code)


def _span(stream: EncodedStream, alg: EmbedAlgorithm, offset_codes: int, n_bits: int):
    planes = alg.planes(stream.bits_per_code)
    per_code = len(planes)
    if offset_codes < 0:
        raise ValueError("offset must be >= 0")
    n_codes = -(-n_bits // per_code)
    available = max(len(stream) - offset_codes, 0) * per_code
    if offset_codes + n_codes > len(stream):
        raise CapacityError(
            f"{n_bits} bits do not fit from offset {offset_codes}: {available} bits available",
            shortfall_bits=n_bits - available,
        )
    return planes, per_code


def embed_bits(stream: EncodedStream, alg: EmbedAlgorithm, offset_codes: int, bits: BitString) -> EncodedStream:
    bits = np.asarray(bits, dtype=np.uint8)
    planes, per_code = _span(stream, alg, offset_codes, int(bits.size))
    codes = stream.codes.copy()
    for j, plane in enumerate(planes):
        chunk = bits[j::per_code]
        if not chunk.size:
            continue
        target = offset_codes + np.arange(chunk.size)
        keep = np.uint8(0xFF ^ (1 << plane))
        codes[target] = (codes[target] & keep) | (chunk << plane).astype(np.uint8)
    return stream.with_codes(codes)


def extract_bits(stream: EncodedStream, alg: EmbedAlgorithm, offset_codes: int, count: int) -> BitString:
    if count == 0:
        return empty()
    planes, per_code = _span(stream, alg, offset_codes, count)
    out = np.zeros(count, dtype=np.uint8)
    for j, plane in enumerate(planes):
        n = out[j::per_code].size
        if not n:
            continue
        source = stream.codes[offset_codes:offset_codes + n]
        out[j::per_code] = (source >> plane) & 1
    return out


def hidden_fraction(total_hidden_bits: int, stream: EncodedStream) -> float:
    if len(stream) == 0:
        raise ValueError("hidden fraction of an empty stream")
    return total_hidden_bits / stream.total_bits


def remaining_capacity(stream: EncodedStream, alg: EmbedAlgorithm, offset_codes: int) -> int:
    """Bits available from offset_codes to the end of the stream."""
    return max(len(stream) - offset_codes, 0) * alg.bits_targeted(stream.bits_per_code)
