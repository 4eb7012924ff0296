"""IPv4 fragmentation and reassembly."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from ..wire.ipv4 import IPV4_HEADER_LEN, Ipv4Packet


def fragment(packet: Ipv4Packet, mtu: int) -> list[Ipv4Packet]:
    """Split ``packet`` so every piece fits ``mtu``; offsets stay 8-byte aligned."""
    if packet.total_length <= mtu:
        return [packet]
    if mtu < 68:
        raise ValueError(f"MTU {mtu} below the IPv4 minimum of 68")
    chunk = (mtu - IPV4_HEADER_LEN) // 8 * 8
    data = packet.payload
    base = packet.fragment_offset
    pieces = []
    for start in range(0, len(data), chunk):
        part = data[start:start + chunk]
        last = start + chunk >= len(data)
        pieces.append(replace(packet, payload=part, fragment_offset=base + start // 8,
                              mf=packet.mf or not last, checksum=None))
    return pieces


@dataclass
class _Buffer:
    first: Ipv4Packet | None = None
    parts: dict[int, bytes] = field(default_factory=dict)
    total: int | None = None
    deadline: int = 0


class Reassembler:
    """Collects fragments keyed by (src, dst, id, protocol)."""

    def __init__(self, timeout: int):
        self.timeout = timeout
        self.buffers: dict[tuple, _Buffer] = {}
        self.timeouts = 0

    def add(self, packet: Ipv4Packet, now: int) -> Ipv4Packet | None:
        if not packet.is_fragment:
            return packet
        self.expire(now)
        key = (packet.src, packet.dst, packet.identification, packet.protocol)
        buf = self.buffers.get(key)
        if buf is None:
            buf = self.buffers[key] = _Buffer(deadline=now + self.timeout)
        offset = packet.fragment_offset * 8
        buf.parts[offset] = packet.payload
        if packet.fragment_offset == 0:
            buf.first = packet
        if not packet.mf:
            buf.total = offset + len(packet.payload)
        if buf.total is None or buf.first is None:
            return None
        data = bytearray(buf.total)
        covered = 0
        for off in sorted(buf.parts):
            if off > covered:
                return None  # hole
            piece = buf.parts[off]
            data[off:off + len(piece)] = piece
            covered = max(covered, off + len(piece))
        if covered < buf.total:
            return None
        del self.buffers[key]
        return replace(buf.first, payload=bytes(data[:buf.total]), mf=False, fragment_offset=0, checksum=None)

    def expire(self, now: int) -> None:
        for key in [k for k, b in self.buffers.items() if b.deadline <= now]:
            del self.buffers[key]
            self.timeouts += 1
