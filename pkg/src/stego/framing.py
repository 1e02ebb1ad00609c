"""
Placement of one micro-protocol element inside a packet's code units.

FIXED mode writes the element contiguously at the announced offset.
CHAINED mode keeps the header at the announced offset and moves the body of
DAT elements further into the packet: a 5-bit gap follows the header bits and
the body starts that many code units after the code holding the gap's last bit.
"""
import logging
from typing import Callable, Tuple

from src.audio.codecs import EncodedStream
from src.errors import CapacityError, TruncationError
from src.stego.bits import BitString, bits_to_int, concat, int_to_bits
from src.stego.embed import (
    EmbedAlgorithm,
    PlacementMode,
    embed_bits,
    extract_bits,
    remaining_capacity,
)

logger = logging.getLogger(__name__)

GAP_BITS = 5
MAX_GAP = (1 << GAP_BITS) - 1

# Maps the leading bits of an element to (header width, has body).
HeadPeek = Callable[[BitString], Tuple[int, bool]]


def _codes_for(n_bits: int, per_code: int) -> int:
    return -(-n_bits // per_code)


def body_capacity_bits(packet_codes: int, alg: EmbedAlgorithm, bits_per_code: int,
                       mode: PlacementMode, offset_codes: int, head_width: int) -> int:
    """Bits left for an element body behind a header of head_width bits."""
    per_code = alg.bits_targeted(bits_per_code)
    if mode is PlacementMode.CHAINED:
        free_codes = packet_codes - offset_codes - _codes_for(head_width + GAP_BITS, per_code)
        return max(free_codes, 0) * per_code
    return max((packet_codes - offset_codes) * per_code - head_width, 0)


def place_element(stream: EncodedStream, alg: EmbedAlgorithm, mode: PlacementMode,
                  offset_codes: int, head: BitString, body: BitString, gap: int = 0) -> EncodedStream:
    """Write head and body into one packet; returns the stego packet."""
    if mode is PlacementMode.FIXED or body.size == 0:
        return embed_bits(stream, alg, offset_codes, concat(head, body))
    per_code = alg.bits_targeted(stream.bits_per_code)
    head_codes = _codes_for(head.size + GAP_BITS, per_code)
    body_codes = _codes_for(body.size, per_code)
    room = len(stream) - offset_codes - head_codes - body_codes
    if room < 0:
        raise CapacityError(
            f"chained element needs {head_codes + body_codes} codes from offset {offset_codes}",
            shortfall_bits=-room * per_code,
        )
    gap = max(0, min(gap, room, MAX_GAP))
    stego = embed_bits(stream, alg, offset_codes, concat(head, int_to_bits(gap, GAP_BITS)))
    return embed_bits(stego, alg, offset_codes + head_codes + gap, body)


def lift_element(stream: EncodedStream, alg: EmbedAlgorithm, mode: PlacementMode,
                 offset_codes: int, peek: HeadPeek) -> BitString:
    """
    Read the hidden bits of one element from a packet.

    Returns every bit from the element start to the end of the packet, with a
    chained body moved back behind its header so decoders see one contiguous
    prefix.
    """
    available = remaining_capacity(stream, alg, offset_codes)
    raw = extract_bits(stream, alg, offset_codes, available)
    if mode is PlacementMode.FIXED:
        return raw
    head_width, has_body = peek(raw)
    if not has_body:
        return raw
    if raw.size < head_width + GAP_BITS:
        raise TruncationError(f"chained header needs {head_width + GAP_BITS} bits, packet holds {raw.size}")
    gap = bits_to_int(raw[head_width:head_width + GAP_BITS])
    per_code = alg.bits_targeted(stream.bits_per_code)
    body_start = offset_codes + _codes_for(head_width + GAP_BITS, per_code) + gap
    body = extract_bits(stream, alg, body_start, remaining_capacity(stream, alg, body_start))
    logger.debug("chained body at code %d (gap %d)", body_start, gap)
    return concat(raw[:head_width], body)
