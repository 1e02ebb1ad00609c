"""
Packet channels: an in-memory queue for simulations and a UDP socket pair for
live runs. Both apply a seeded LossModel when sending; the channel drops and
reorders packets but never alters their bytes.
"""
import logging
import queue
import socket
import threading
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from src.errors import ChannelClosedError, ConfigError, TransportError
from src.transport.rtp import RtpPacket

logger = logging.getLogger(__name__)

MAX_DATAGRAM = 65535


@dataclass(frozen=True)
class LossModel:
    loss_probability: float = 0.0
    reorder_probability: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("loss_probability", "reorder_probability"):
            value = getattr(self, name)
            if not 0.0 <= value < 1.0:
                raise ConfigError(f"{name} must be in [0, 1), got {value}")

    def filter(self) -> "LossFilter":
        return LossFilter(self)


class LossFilter:
    """
    Stateful application of a LossModel to one direction of traffic.

    Two uniform draws per packet keep the outcome reproducible for a seed:
    the first decides loss, the second whether the packet is held back and
    delivered after its successor.
    """

    def __init__(self, model: LossModel):
        self.model = model
        self._rng = np.random.default_rng(model.seed)
        self._held: Optional[RtpPacket] = None
        self.sent = 0
        self.dropped = 0
        self.reordered = 0

    def submit(self, packet: RtpPacket) -> List[RtpPacket]:
        """Packets to deliver now, in delivery order."""
        self.sent += 1
        lose, hold = self._rng.random(2)
        if lose < self.model.loss_probability:
            self.dropped += 1
            return []
        if self._held is not None:
            held, self._held = self._held, None
            return [packet, held]
        if hold < self.model.reorder_probability:
            self._held = packet
            self.reordered += 1
            return []
        return [packet]

    def flush(self) -> List[RtpPacket]:
        held, self._held = self._held, None
        return [held] if held is not None else []


class MemoryChannel:
    """One direction of an in-process link."""

    def __init__(self, loss: LossModel = LossModel()):
        self._filter = loss.filter()
        self._queue: "queue.Queue[RtpPacket]" = queue.Queue()
        self._closed = False

    @property
    def stats(self) -> LossFilter:
        return self._filter

    def send(self, packet: RtpPacket) -> None:
        if self._closed:
            raise ChannelClosedError("send on a closed channel")
        for delivered in self._filter.submit(packet):
            self._queue.put(delivered)

    def recv(self, timeout: Optional[float] = None) -> Optional[RtpPacket]:
        """Next delivered packet, or None when nothing arrives in time."""
        try:
            return self._queue.get(block=timeout is not None, timeout=timeout)
        except queue.Empty:
            if self._closed:
                raise ChannelClosedError("channel closed") from None
            return None

    def drain(self) -> List[RtpPacket]:
        packets = []
        while True:
            try:
                packets.append(self._queue.get_nowait())
            except queue.Empty:
                return packets

    def close(self) -> None:
        for delivered in self._filter.flush():
            self._queue.put(delivered)
        self._closed = True


def parse_address(text: str) -> Tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise ConfigError(f"expected HOST:PORT, got {text!r}")
    return host or "127.0.0.1", int(port)


class UdpChannel:
    """
    Both directions of a live link over one UDP socket.

    A background thread reads datagrams into an ordered queue so the engine
    loop only ever sees whole packets, one at a time.
    """

    def __init__(self, local: Tuple[str, int], peer: Tuple[str, int], loss: LossModel = LossModel()):
        self.peer = peer
        self._filter = loss.filter()
        self._queue: "queue.Queue[RtpPacket]" = queue.Queue()
        self._stop = threading.Event()
        try:
            self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
            self._sock.bind(local)
            self._sock.settimeout(0.1)
        except OSError as exc:
            raise TransportError(f"cannot bind UDP socket to {local[0]}:{local[1]}: {exc}") from exc
        self.local = self._sock.getsockname()
        self._reader = threading.Thread(target=self._read_loop, name="udp-reader", daemon=True)
        self._reader.start()
        logger.info("UDP channel %s:%d -> %s:%d", self.local[0], self.local[1], peer[0], peer[1])

    @property
    def stats(self) -> LossFilter:
        return self._filter

    def _read_loop(self) -> None:
        while not self._stop.is_set():
            try:
                datagram, _ = self._sock.recvfrom(MAX_DATAGRAM)
            except socket.timeout:
                continue
            except OSError:
                if not self._stop.is_set():
                    logger.exception("UDP receive failed")
                break
            try:
                self._queue.put(RtpPacket.from_bytes(datagram))
            except TransportError as exc:
                logger.warning("dropping malformed datagram: %s", exc)

    def send(self, packet: RtpPacket) -> None:
        if self._stop.is_set():
            raise ChannelClosedError("send on a closed channel")
        for delivered in self._filter.submit(packet):
            try:
                self._sock.sendto(delivered.to_bytes(), self.peer)
            except OSError as exc:
                raise TransportError(f"UDP send to {self.peer[0]}:{self.peer[1]} failed: {exc}") from exc

    def recv(self, timeout: Optional[float] = None) -> Optional[RtpPacket]:
        try:
            return self._queue.get(block=timeout is not None, timeout=timeout)
        except queue.Empty:
            if self._stop.is_set():
                raise ChannelClosedError("channel closed") from None
            return None

    def drain(self) -> List[RtpPacket]:
        packets = []
        while True:
            try:
                packets.append(self._queue.get_nowait())
            except queue.Empty:
                return packets

    def close(self) -> None:
        if self._stop.is_set():
            return
        for delivered in self._filter.flush():
            try:
                self._sock.sendto(delivered.to_bytes(), self.peer)
            except OSError:
                pass
        self._stop.set()
        self._reader.join(timeout=1.0)
        self._sock.close()
