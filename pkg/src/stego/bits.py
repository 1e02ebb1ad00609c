"""
BitString helpers. A BitString is a 1-D uint8 numpy array of 0/1 values,
most significant bit first whenever it was built from integers or bytes.
"""
from typing import Iterable, Union

import numpy as np

from src.errors import TruncationError

BitString = np.ndarray


def as_bits(values: Union[Iterable[int], str, np.ndarray]) -> BitString:
    """Build a BitString from 0/1 values or a string such as "10·011"."""
    if isinstance(values, str):
        values = [int(ch) for ch in values if ch in "01"]
    bits = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=np.uint8)
    if bits.ndim != 1 or (bits.size and bits.max() > 1):
        raise ValueError("a BitString holds 0/1 values only")
    return bits


def empty() -> BitString:
    return np.zeros(0, dtype=np.uint8)


def int_to_bits(value: int, width: int) -> BitString:
    if width < 0 or value < 0 or value >= (1 << width):
        raise ValueError(f"{value} does not fit {width} bits")
    return np.array([(value >> (width - 1 - i)) & 1 for i in range(width)], dtype=np.uint8)


def bits_to_int(bits: BitString) -> int:
    value = 0
    for b in bits.tolist():
        value = (value << 1) | b
    return value


def bytes_to_bits(data: bytes) -> BitString:
    return np.unpackbits(np.frombuffer(bytes(data), dtype=np.uint8))


def bits_to_bytes(bits: BitString) -> bytes:
    if bits.size % 8:
        raise ValueError("bit count is not a multiple of 8")
    return np.packbits(bits).tobytes()


def concat(*parts: BitString) -> BitString:
    if not parts:
        return empty()
    return np.concatenate([np.asarray(p, dtype=np.uint8) for p in parts])


def to_str(bits: BitString) -> str:
    return "".join(str(b) for b in bits.tolist())


class BitReader:
    """Sequential MSB-first reader used by the header decoders."""

    def __init__(self, bits: BitString):
        self.bits = bits
        self.pos = 0

    @property
    def remaining(self) -> int:
        return int(self.bits.size) - self.pos

    def read(self, width: int) -> int:
        if width > self.remaining:
            raise TruncationError(f"need {width} bits at position {self.pos}, only {self.remaining} left")
        value = bits_to_int(self.bits[self.pos:self.pos + width])
        self.pos += width
        return value

    def read_bits(self, width: int) -> BitString:
        if width > self.remaining:
            raise TruncationError(f"need {width} bits at position {self.pos}, only {self.remaining} left")
        chunk = self.bits[self.pos:self.pos + width].copy()
        self.pos += width
        return chunk
