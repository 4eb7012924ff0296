from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace

from .addr import Ipv4Addr
from .checksum import checksum16, incremental_update, verifies
from .ethernet import DecodeError

IPV4_HEADER_LEN = 20
PROTO_ICMP = 1
PROTO_TCP = 6
PROTO_UDP = 17

_FMT = "!BBHHHBBH4s4s"


@dataclass(frozen=True)
class Ipv4Packet:
    src: Ipv4Addr
    dst: Ipv4Addr
    protocol: int
    payload: bytes = b""
    ttl: int = 64
    identification: int = 0
    df: bool = False
    mf: bool = False
    fragment_offset: int = 0  # in 8-byte units
    tos: int = 0
    checksum: int | None = field(default=None, compare=False)
    checksum_ok: bool = field(default=True, compare=False)

    @property
    def total_length(self) -> int:
        return IPV4_HEADER_LEN + len(self.payload)

    @property
    def is_fragment(self) -> bool:
        return self.mf or self.fragment_offset > 0

    def header(self, checksum: int = 0) -> bytes:
        flags = (0x4000 if self.df else 0) | (0x2000 if self.mf else 0)
        return struct.pack(_FMT, 0x45, self.tos, self.total_length, self.identification,
                           flags | self.fragment_offset, self.ttl, self.protocol, checksum,
                           self.src.packed, self.dst.packed)

    def encode(self, keep_checksum: bool = False) -> bytes:
        if self.total_length > 0xFFFF:
            raise ValueError(f"IPv4 total length {self.total_length} exceeds 65535")
        if keep_checksum and self.checksum is not None:
            csum = self.checksum
        else:
            csum = checksum16(self.header())
        return self.header(csum) + bytes(self.payload)

    def computed_checksum(self) -> int:
        return checksum16(self.header())

    def with_ttl_decremented(self) -> Ipv4Packet:
        """Next-hop copy with TTL-1 and the checksum patched incrementally."""
        old = self.checksum if self.checksum is not None else self.computed_checksum()
        old_word = (self.ttl << 8) | self.protocol
        new_word = ((self.ttl - 1) << 8) | self.protocol
        return replace(self, ttl=self.ttl - 1, checksum=incremental_update(old, old_word, new_word))

    @classmethod
    def decode(cls, data: bytes) -> Ipv4Packet:
        if len(data) < IPV4_HEADER_LEN:
            raise DecodeError(f"IPv4 header truncated ({len(data)} bytes)")
        vihl, tos, total, ident, frag, ttl, proto, csum, src, dst = struct.unpack_from(_FMT, data)
        if vihl >> 4 != 4:
            raise DecodeError(f"IP version {vihl >> 4} is not 4")
        if vihl & 0x0F != 5:
            raise DecodeError("IPv4 options are not supported (ihl != 5)")
        if total < IPV4_HEADER_LEN or total > len(data):
            raise DecodeError(f"IPv4 total length {total} inconsistent with {len(data)} bytes")
        return cls(
            src=Ipv4Addr(src), dst=Ipv4Addr(dst), protocol=proto,
            payload=bytes(data[IPV4_HEADER_LEN:total]), ttl=ttl, identification=ident,
            df=bool(frag & 0x4000), mf=bool(frag & 0x2000), fragment_offset=frag & 0x1FFF,
            tos=tos, checksum=csum, checksum_ok=verifies(data[:IPV4_HEADER_LEN]),
        )
