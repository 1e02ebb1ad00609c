"""
Dynamic micro-protocol header.

A message is a sequence of chunks, each a 3-bit header type followed by a
value whose width depends on the type. LEN, NHO, FMT and VER are status
updates: they write a register of the decode context that persists until it
is overwritten, and DAT reads its width from the LEN register.
"""
import enum
from dataclasses import dataclass, replace
from typing import List, Optional, Tuple

from src.errors import CapacityError, HeaderEncodingError, ProtocolError
from src.protocol.fields import (
    DEFAULT_FORMAT,
    DEFAULT_VERSION,
    DMY_BITS,
    LEN_BITS,
    MAX_SEGMENT_BYTES,
    NHO_BITS,
    Command,
    PayloadFormat,
)
from src.stego.bits import BitReader, BitString, bits_to_bytes, bytes_to_bits, concat, int_to_bits

HT_BITS = 3

BOM = 0
EOM = 1


class DynType(enum.IntEnum):
    REQ = 0b000
    RES = 0b001
    DMY = 0b010
    DAT = 0b011
    LEN = 0b100
    NHO = 0b101
    FMT = 0b110
    VER = 0b111


VALUE_BITS = {
    DynType.REQ: 1,
    DynType.RES: 2,
    DynType.DMY: DMY_BITS,
    DynType.LEN: LEN_BITS,
    DynType.NHO: NHO_BITS,
    DynType.FMT: 1,
    DynType.VER: 2,
}

# Largest chunk without a body; every packet must at least hold this.
MIN_PACKET_BITS = HT_BITS + max(VALUE_BITS.values())


@dataclass(frozen=True)
class DynChunk:
    """One chunk. Fixed-width types carry val; DAT carries data."""

    ht: DynType
    val: int = 0
    data: bytes = b""

    @property
    def width(self) -> int:
        if self.ht is DynType.DAT:
            return HT_BITS + 8 * len(self.data)
        return HT_BITS + VALUE_BITS[self.ht]

    def value_bits(self) -> BitString:
        if self.ht is DynType.DAT:
            return bytes_to_bits(self.data)
        return int_to_bits(self.val, VALUE_BITS[self.ht])

    def describe(self) -> str:
        if self.ht is DynType.REQ:
            return "BOM" if self.val == BOM else "EOM"
        if self.ht is DynType.DAT:
            return f"DAT[{len(self.data)}B]"
        return f"{self.ht.name}={self.val}"


def bom() -> DynChunk:
    return DynChunk(DynType.REQ, BOM)


def eom() -> DynChunk:
    return DynChunk(DynType.REQ, EOM)


@dataclass(frozen=True)
class DecodeContext:
    active_len_bytes: Optional[int] = None
    version: Optional[int] = None
    format: Optional[PayloadFormat] = None
    next_offset_codes: Optional[int] = None

    def effective_version(self) -> int:
        return DEFAULT_VERSION if self.version is None else self.version

    def effective_format(self) -> PayloadFormat:
        return DEFAULT_FORMAT if self.format is None else self.format

    def apply(self, chunk: DynChunk) -> "DecodeContext":
        """Register write for status-update chunks; other chunks leave the context as is."""
        if chunk.ht is DynType.LEN:
            return replace(self, active_len_bytes=chunk.val)
        if chunk.ht is DynType.VER:
            return replace(self, version=chunk.val)
        if chunk.ht is DynType.FMT:
            return replace(self, format=PayloadFormat(chunk.val))
        if chunk.ht is DynType.NHO:
            return replace(self, next_offset_codes=chunk.val)
        return self


def encode_chunk(c: DynChunk, ctx: Optional[DecodeContext] = None) -> BitString:
    if c.ht is DynType.DAT:
        if ctx is not None and ctx.active_len_bytes != len(c.data):
            raise HeaderEncodingError("DAT", len(c.data), f"DAT of {len(c.data)} bytes under LEN={ctx.active_len_bytes}")
        if len(c.data) > MAX_SEGMENT_BYTES:
            raise HeaderEncodingError("DAT", len(c.data), "DAT longer than 255 bytes")
        return concat(int_to_bits(int(c.ht), HT_BITS), bytes_to_bits(c.data))
    if c.data:
        raise HeaderEncodingError(c.ht.name, c.data, f"{c.ht.name} chunk carries no data")
    width = VALUE_BITS[c.ht]
    if c.ht is DynType.REQ and c.val not in (BOM, EOM):
        raise HeaderEncodingError("REQ", c.val)
    if c.ht is DynType.RES and c.val not in (Command.OK, Command.RESEND):
        raise HeaderEncodingError("RES", c.val)
    if c.ht is DynType.VER and c.val == 0:
        raise HeaderEncodingError("VER", c.val, "version 00 is reserved")
    try:
        value = int_to_bits(int(c.val), width)
    except ValueError:
        raise HeaderEncodingError(c.ht.name, c.val, f"{c.ht.name}={c.val} does not fit {width} bits") from None
    return concat(int_to_bits(int(c.ht), HT_BITS), value)


def decode_chunk(bits: BitString, ctx: DecodeContext) -> Tuple[DynChunk, DecodeContext, int]:
    """Decode one chunk from the front of bits; returns (chunk, updated context, bits consumed)."""
    reader = BitReader(bits)
    ht = DynType(reader.read(HT_BITS))
    if ht is DynType.DAT:
        if ctx.active_len_bytes is None:
            raise ProtocolError("DAT chunk without an active LEN")
        chunk = DynChunk(ht, data=bits_to_bytes(reader.read_bits(8 * ctx.active_len_bytes)))
        return chunk, ctx, reader.pos
    val = reader.read(VALUE_BITS[ht])
    if ht is DynType.RES and val > Command.RESEND:
        raise ProtocolError(f"unknown response command {val:02b}")
    if ht is DynType.VER and val == 0:
        raise ProtocolError("chunk carries reserved version 00")
    if ht is DynType.RES:
        val = Command(val)
    chunk = DynChunk(ht, val)
    return chunk, ctx.apply(chunk), reader.pos


def peek_dynamic(bits: BitString) -> Tuple[int, bool]:
    """Header width and whether a body follows; a DAT header is just its type bits."""
    ht = DynType(BitReader(bits).read(HT_BITS))
    if ht is DynType.DAT:
        return HT_BITS, True
    return HT_BITS + VALUE_BITS[ht], False


# ---------------------------------------------------------------------------
# Request planning
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PlanOptions:
    send_fmt: bool = True
    send_ver: bool = True
    send_nho: bool = True
    fmt: PayloadFormat = DEFAULT_FORMAT
    ver: int = DEFAULT_VERSION
    nho: int = 0
    segment_bytes: Optional[int] = None


def max_segment_bytes(per_packet_capacity: int) -> int:
    """Largest DAT payload a packet of the given hidden capacity can carry."""
    return min(MAX_SEGMENT_BYTES, (per_packet_capacity - HT_BITS) // 8)


def segment(payload: bytes, segment_bytes: int) -> List[bytes]:
    if segment_bytes < 1:
        raise ValueError("segment size must be positive")
    return [payload[i:i + segment_bytes] for i in range(0, len(payload), segment_bytes)]


def plan_request(payload: bytes, per_packet_capacity: int, opts: PlanOptions = PlanOptions()) -> List[DynChunk]:
    """Chunk sequence of one request, one chunk per packet."""
    if per_packet_capacity < MIN_PACKET_BITS:
        raise CapacityError(
            f"{per_packet_capacity} hidden bits per packet, the dynamic header needs {MIN_PACKET_BITS}",
            shortfall_bits=MIN_PACKET_BITS - per_packet_capacity,
        )
    limit = max_segment_bytes(per_packet_capacity)
    size = opts.segment_bytes or limit
    if size > limit:
        raise CapacityError(
            f"{size}-byte segments do not fit {per_packet_capacity} hidden bits per packet",
            shortfall_bits=HT_BITS + 8 * size - per_packet_capacity,
        )
    chunks = [bom()]
    if payload:
        if opts.send_ver:
            chunks.append(DynChunk(DynType.VER, opts.ver))
        if opts.send_fmt:
            chunks.append(DynChunk(DynType.FMT, int(opts.fmt)))
        if opts.send_nho:
            chunks.append(DynChunk(DynType.NHO, opts.nho))
    for part in segment(payload, size):
        chunks += [DynChunk(DynType.LEN, len(part)), DynChunk(DynType.DAT, data=part)]
    chunks.append(eom())
    return chunks


def plan_request_chunks(payload: bytes, per_packet_capacity: int, opts: PlanOptions = PlanOptions()) -> List[BitString]:
    """Per-packet wire images of plan_request."""
    ctx = DecodeContext()
    images = []
    for chunk in plan_request(payload, per_packet_capacity, opts):
        images.append(encode_chunk(chunk, ctx))
        ctx = ctx.apply(chunk)
    return images
