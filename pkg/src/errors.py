"""
Exception hierarchy shared by every layer of the covert channel stack.
"""
from typing import Optional


class StegoError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(StegoError, ValueError):
    """Invalid settings or an invalid combination of settings."""


class UnsupportedCombinationError(ConfigError):
    """Embedding algorithm cannot be used with the codec's code width."""


class WavFormatError(StegoError, ValueError):
    """Malformed RIFF/WAVE container."""


class UnsupportedFormatError(WavFormatError):
    """Well-formed WAV file using an encoding we do not read."""


class CodecMismatchError(StegoError, ValueError):
    """A stream was handed to the decoder of another codec."""


class CapacityError(StegoError):
    """Not enough hidden capacity left in the carrier."""

    def __init__(self, message: str, shortfall_bits: int = 0, progress: Optional[str] = None):
        super().__init__(message)
        self.shortfall_bits = shortfall_bits
        self.progress = progress


class HeaderEncodingError(StegoError, ValueError):
    """A header field value does not fit its wire width."""

    def __init__(self, field: str, value: object, message: str = ""):
        super().__init__(message or f"field {field}={value!r} out of range")
        self.field = field
        self.value = value


class TruncationError(StegoError):
    """Fewer bits available than the header being decoded needs."""


class ProtocolError(StegoError):
    """Bits decode to something the micro protocol does not allow."""


class SegmentationError(StegoError):
    """Payload needs more segments than one request can announce."""


class SessionError(StegoError):
    """Operation not allowed in the session's current phase."""


class StreamConfusionError(StegoError):
    """Packets of different RTP streams were mixed."""


class TransportError(StegoError):
    """Socket level failure."""


class ChannelClosedError(TransportError):
    """Send or receive on a closed channel."""


class ExternalToolError(StegoError):
    """The external quality-scoring tool failed or printed no score."""
