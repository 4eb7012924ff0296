from __future__ import annotations

import struct
from dataclasses import dataclass, field

from .addr import Ipv4Addr
from .checksum import checksum16, ones_sum, pseudo_header
from .ethernet import DecodeError
from .ipv4 import PROTO_UDP

UDP_HEADER_LEN = 8
UDP_MAX_PAYLOAD = 65507


@dataclass(frozen=True)
class UdpDatagram:
    src_port: int
    dst_port: int
    payload: bytes = b""
    checksum: int | None = field(default=None, compare=False)
    checksum_ok: bool = field(default=True, compare=False)

    @property
    def length(self) -> int:
        return UDP_HEADER_LEN + len(self.payload)

    def encode(self, src: Ipv4Addr, dst: Ipv4Addr) -> bytes:
        if len(self.payload) > UDP_MAX_PAYLOAD:
            raise ValueError(f"UDP payload of {len(self.payload)} bytes exceeds {UDP_MAX_PAYLOAD}")
        head = struct.pack("!HHHH", self.src_port, self.dst_port, self.length, 0)
        csum = checksum16(pseudo_header(src, dst, PROTO_UDP, self.length) + head + self.payload)
        if csum == 0:
            csum = 0xFFFF  # zero would mean "no checksum"
        return head[:6] + struct.pack("!H", csum) + bytes(self.payload)

    @classmethod
    def decode(cls, data: bytes, src: Ipv4Addr, dst: Ipv4Addr) -> UdpDatagram:
        if len(data) < UDP_HEADER_LEN:
            raise DecodeError(f"UDP header truncated ({len(data)} bytes)")
        sport, dport, length, csum = struct.unpack_from("!HHHH", data)
        if length < UDP_HEADER_LEN or length > len(data):
            raise DecodeError(f"UDP length {length} inconsistent with {len(data)} bytes")
        body = bytes(data[:length])
        ok = csum == 0 or ones_sum(pseudo_header(src, dst, PROTO_UDP, length) + body) == 0xFFFF
        return cls(sport, dport, body[UDP_HEADER_LEN:], csum, ok)
