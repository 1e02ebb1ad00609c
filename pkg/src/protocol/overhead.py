"""Header cost of the two designs for a given payload, and where they cross."""
from dataclasses import dataclass, replace

from src.protocol import static_header as sh
from src.protocol.dynamic_header import HT_BITS, DynType, PlanOptions, plan_request
from src.protocol.fields import MAX_SEGMENT_BYTES


@dataclass(frozen=True)
class OverheadComparison:
    payload_bytes: int
    segments: int
    static_bits: int
    dynamic_bits: int


def _segments(payload_bytes: int, segment_bytes: int) -> int:
    return -(-payload_bytes // segment_bytes)


def static_header_bits(payload_bytes: int, segment_bytes: int = MAX_SEGMENT_BYTES) -> int:
    """REQ per 63 segments plus one DAT header per segment."""
    segments = _segments(payload_bytes, segment_bytes)
    requests = max(1, _segments(segments, sh.MAX_SEGMENTS))
    return requests * sh.Request.width() + segments * sh.Data.width()


def dynamic_header_bits(payload_bytes: int, segment_bytes: int = MAX_SEGMENT_BYTES,
                        opts: PlanOptions = PlanOptions()) -> int:
    """Every chunk of the request plan, counting only the type bits of DAT chunks."""
    opts = replace(opts, segment_bytes=segment_bytes)
    capacity = HT_BITS + 8 * segment_bytes
    plan = plan_request(bytes(payload_bytes), capacity, opts)
    return sum(HT_BITS if c.ht is DynType.DAT else c.width for c in plan)


def compare(payload_bytes: int, segment_bytes: int = MAX_SEGMENT_BYTES,
            opts: PlanOptions = PlanOptions()) -> OverheadComparison:
    return OverheadComparison(
        payload_bytes=payload_bytes,
        segments=_segments(payload_bytes, segment_bytes),
        static_bits=static_header_bits(payload_bytes, segment_bytes),
        dynamic_bits=dynamic_header_bits(payload_bytes, segment_bytes, opts),
    )


def crossover_bytes(max_payload: int = 4096, segment_bytes: int = MAX_SEGMENT_BYTES,
                    opts: PlanOptions = PlanOptions()) -> int:
    """
    Smallest payload size from which the dynamic plan stays strictly cheaper
    than the static one up to max_payload. Returns 0 when it never is.
    """
    crossover = 0
    for size in range(max_payload, 0, -1):
        c = compare(size, segment_bytes, opts)
        if c.dynamic_bits >= c.static_bits:
            break
        crossover = size
    return crossover
