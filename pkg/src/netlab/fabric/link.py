from __future__ import annotations

from typing import Callable

from ..wire.ethernet import ETH_HEADER_LEN
from ..wire.pcap import PcapCapture, PcapRecord
from .sim import SECOND, Simulator

DEFAULT_MTU = 1500
DEFAULT_RATE = 10**9
DEFAULT_DELAY = 100_000  # ns


class FrameTooLong(ValueError):
    """The frame exceeds the link MTU plus the Ethernet header."""


class CaptureTap:
    """Passive promiscuous recorder of every frame crossing one port."""

    def __init__(self, name: str):
        self.name = name
        self.capture = PcapCapture()
        self.enabled = True

    def record(self, time_ns: int, frame: bytes) -> None:
        if self.enabled:
            self.capture.append(PcapRecord.at_ns(time_ns, frame))


class Port:
    """Attachment point of a node onto a link."""

    def __init__(self, owner_name: str, name: str, on_receive: Callable[[Port, bytes], None]):
        self.owner_name = owner_name
        self.name = name
        self.on_receive = on_receive
        self.link: Link | None = None
        self.taps: list[CaptureTap] = []
        self.tx_frames = 0
        self.rx_frames = 0

    @property
    def label(self) -> str:
        return f"{self.owner_name}.{self.name}"

    def transmit(self, frame: bytes) -> None:
        if self.link is None:
            return
        self.link.transmit(self, frame)

    def __repr__(self) -> str:
        return f"Port({self.label})"


class Link:
    """Full-duplex point-to-point cable between two ports.

    Each direction serialises frames one after another; a frame handed over at
    time t starts on the wire at max(t, end of previous frame) and arrives
    ``bits/rate + delay`` later.
    """

    def __init__(self, sim: Simulator, a: Port, b: Port, *, mtu: int = DEFAULT_MTU,
                 rate: int = DEFAULT_RATE, delay: int = DEFAULT_DELAY, drop: float = 0.0):
        if a.link is not None or b.link is not None:
            raise ValueError(f"port already connected: {a.label if a.link else b.label}")
        self.sim = sim
        self.a, self.b = a, b
        self.mtu = mtu
        self.rate = rate
        self.delay = delay
        self.drop = drop
        self.up = True
        self._rng = sim.rng(f"link:{a.label}:{b.label}")
        self._busy_until = {id(a): 0, id(b): 0}
        self.dropped = 0
        a.link = self
        b.link = self

    def peer(self, port: Port) -> Port:
        return self.b if port is self.a else self.a

    def serialization_ns(self, nbytes: int) -> int:
        return -(-nbytes * 8 * SECOND // self.rate)

    def transmit(self, port: Port, frame: bytes) -> None:
        if len(frame) > self.mtu + ETH_HEADER_LEN:
            raise FrameTooLong(f"{len(frame)}-byte frame exceeds MTU {self.mtu} on {port.label}")
        now = self.sim.now
        port.tx_frames += 1
        for tap in port.taps:
            tap.record(now, frame)
        start = max(now, self._busy_until[id(port)])
        done = start + self.serialization_ns(len(frame))
        self._busy_until[id(port)] = done
        if not self.up:
            self.dropped += 1
            return
        if self.drop and self._rng.random() < self.drop:
            self.dropped += 1
            return
        self.sim.schedule(done + self.delay, self._deliver, self.peer(port), frame)

    def _deliver(self, port: Port, frame: bytes) -> None:
        if not self.up:
            self.dropped += 1
            return
        port.rx_frames += 1
        for tap in port.taps:
            tap.record(self.sim.now, frame)
        port.on_receive(port, frame)
