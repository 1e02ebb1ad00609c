"""
Static micro-protocol header.

Every element starts with a 2-bit header type and a 5-bit next-header offset,
followed by the fields of its variant, all MSB-first:

    REQ  00 nho fmt(1) cnt(6) ver(2)   16 bits
    DAT  01 nho len(8)                 15 bits, then len payload bytes
    RES  10 nho cmd(2)                  9 bits
    DMY  11 nho dmy(9)                 16 bits
"""
import enum
from dataclasses import dataclass, fields
from typing import ClassVar, Tuple, Union

from src.errors import HeaderEncodingError, ProtocolError, TruncationError
from src.protocol.fields import (
    DMY_BITS,
    LEN_BITS,
    NHO_BITS,
    Command,
    PayloadFormat,
)
from src.stego.bits import BitReader, BitString, bits_to_bytes, bytes_to_bits, concat, empty, int_to_bits

HT_BITS = 2
CNT_BITS = 6
MAX_SEGMENTS = (1 << CNT_BITS) - 1


class StaticType(enum.IntEnum):
    REQ = 0b00
    DAT = 0b01
    RES = 0b10
    DMY = 0b11


@dataclass(frozen=True)
class _Header:
    HT: ClassVar[StaticType]
    # (attribute, width) in wire order after HT and NHO
    LAYOUT: ClassVar[Tuple[Tuple[str, int], ...]] = ()

    @classmethod
    def width(cls) -> int:
        return HT_BITS + NHO_BITS + sum(w for _, w in cls.LAYOUT)

    def with_nho(self, nho: int):
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values["nho"] = nho
        return type(self)(**values)


@dataclass(frozen=True)
class Request(_Header):
    nho: int = 0
    fmt: PayloadFormat = PayloadFormat.BINARY
    cnt: int = 0
    ver: int = 1
    HT: ClassVar[StaticType] = StaticType.REQ
    LAYOUT: ClassVar[Tuple[Tuple[str, int], ...]] = (("fmt", 1), ("cnt", CNT_BITS), ("ver", 2))


@dataclass(frozen=True)
class Data(_Header):
    """A DAT header; payload travels as the element body and is not part of the header width."""

    nho: int = 0
    len: int = 0
    payload: bytes = b""
    HT: ClassVar[StaticType] = StaticType.DAT
    LAYOUT: ClassVar[Tuple[Tuple[str, int], ...]] = (("len", LEN_BITS),)


@dataclass(frozen=True)
class Response(_Header):
    nho: int = 0
    cmd: Command = Command.OK
    HT: ClassVar[StaticType] = StaticType.RES
    LAYOUT: ClassVar[Tuple[Tuple[str, int], ...]] = (("cmd", 2),)


@dataclass(frozen=True)
class Dummy(_Header):
    nho: int = 0
    dmy: int = 0
    HT: ClassVar[StaticType] = StaticType.DMY
    LAYOUT: ClassVar[Tuple[Tuple[str, int], ...]] = (("dmy", DMY_BITS),)


StaticHeader = Union[Request, Data, Response, Dummy]
_BY_TYPE = {cls.HT: cls for cls in (Request, Data, Response, Dummy)}


def _field(name: str, value: int, width: int) -> BitString:
    try:
        return int_to_bits(int(value), width)
    except (ValueError, TypeError):
        raise HeaderEncodingError(name, value, f"{name}={value!r} does not fit {width} bits") from None


def encode_static(h: StaticHeader) -> BitString:
    """Header bits only; a DAT payload is produced by encode_static_element."""
    if isinstance(h, Request) and h.ver == 0:
        raise HeaderEncodingError("ver", h.ver, "version 00 is reserved")
    if isinstance(h, Response) and int(h.cmd) not in (Command.OK, Command.RESEND):
        raise HeaderEncodingError("cmd", h.cmd)
    parts = [int_to_bits(int(h.HT), HT_BITS), _field("nho", h.nho, NHO_BITS)]
    parts += [_field(name, getattr(h, name), width) for name, width in h.LAYOUT]
    return concat(*parts)


def encode_static_element(h: StaticHeader) -> Tuple[BitString, BitString]:
    """Split an element into (header bits, body bits)."""
    head = encode_static(h)
    if isinstance(h, Data):
        if len(h.payload) != h.len:
            raise HeaderEncodingError("len", h.len, f"len={h.len} but payload holds {len(h.payload)} bytes")
        return head, bytes_to_bits(h.payload)
    return head, empty()


def _decode(reader: BitReader) -> StaticHeader:
    ht = StaticType(reader.read(HT_BITS))
    cls = _BY_TYPE[ht]
    if reader.remaining < cls.width() - HT_BITS:
        raise TruncationError(f"{ht.name} header needs {cls.width()} bits, got {reader.pos + reader.remaining}")
    nho = reader.read(NHO_BITS)
    values = {name: reader.read(width) for name, width in cls.LAYOUT}
    if cls is Request:
        if values["ver"] == 0:
            raise ProtocolError("request carries reserved version 00")
        values["fmt"] = PayloadFormat(values["fmt"])
    if cls is Response:
        if values["cmd"] > Command.RESEND:
            raise ProtocolError(f"unknown response command {values['cmd']:02b}")
        values["cmd"] = Command(values["cmd"])
    return cls(nho=nho, **values)


def decode_static(bits: BitString) -> Tuple[StaticHeader, int]:
    """Decode one header from the front of bits; returns (header, bits consumed)."""
    reader = BitReader(bits)
    header = _decode(reader)
    return header, reader.pos


def decode_static_element(bits: BitString) -> Tuple[StaticHeader, int]:
    """Like decode_static, but a DAT header also consumes its payload body."""
    reader = BitReader(bits)
    header = _decode(reader)
    if isinstance(header, Data):
        payload = bits_to_bytes(reader.read_bits(8 * header.len))
        header = Data(nho=header.nho, len=header.len, payload=payload)
    return header, reader.pos


def peek_static(bits: BitString) -> Tuple[int, bool]:
    """Header width and whether a body follows, from the leading type bits."""
    ht = StaticType(BitReader(bits).read(HT_BITS))
    cls = _BY_TYPE[ht]
    return cls.width(), cls is Data
