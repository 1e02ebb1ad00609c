"""Field values shared by the static and dynamic header designs."""
import enum

NHO_BITS = 5
MAX_NHO = (1 << NHO_BITS) - 1
DMY_BITS = 9
LEN_BITS = 8
MAX_SEGMENT_BYTES = (1 << LEN_BITS) - 1


class HeaderDesign(str, enum.Enum):
    STATIC = "static"
    DYNAMIC = "dynamic"


class PayloadFormat(enum.IntEnum):
    TEXT = 0
    BINARY = 1


class Command(enum.IntEnum):
    OK = 0
    RESEND = 1


DEFAULT_VERSION = 1
DEFAULT_FORMAT = PayloadFormat.BINARY
