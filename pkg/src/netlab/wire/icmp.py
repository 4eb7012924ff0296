from __future__ import annotations

import struct
from dataclasses import dataclass, field

from .checksum import checksum16, verifies
from .ethernet import DecodeError

ICMP_ECHO_REPLY = 0
ICMP_DEST_UNREACH = 3
ICMP_ECHO_REQUEST = 8
ICMP_TIME_EXCEEDED = 11

UNREACH_NET = 0
UNREACH_HOST = 1
UNREACH_PORT = 3
UNREACH_FRAG_NEEDED = 4


@dataclass(frozen=True)
class IcmpMessage:
    """ICMP message: 4 header bytes, 4 type-specific bytes (``rest``) and data.

    Echo messages carry identifier/sequence in ``rest``; error messages carry
    the offending IP header plus 8 bytes of its payload in ``data``.
    """

    type: int
    code: int = 0
    rest: bytes = b"\x00\x00\x00\x00"
    data: bytes = b""
    checksum: int | None = field(default=None, compare=False)
    checksum_ok: bool = field(default=True, compare=False)

    @classmethod
    def echo(cls, identifier: int, sequence: int, payload: bytes, reply: bool = False) -> IcmpMessage:
        kind = ICMP_ECHO_REPLY if reply else ICMP_ECHO_REQUEST
        return cls(kind, 0, struct.pack("!HH", identifier, sequence), bytes(payload))

    @classmethod
    def error(cls, type_: int, code: int, original: bytes, next_hop_mtu: int = 0) -> IcmpMessage:
        rest = struct.pack("!HH", 0, next_hop_mtu if code == UNREACH_FRAG_NEEDED else 0)
        return cls(type_, code, rest, bytes(original[:28]))

    @property
    def identifier(self) -> int:
        return struct.unpack("!H", self.rest[:2])[0]

    @property
    def sequence(self) -> int:
        return struct.unpack("!H", self.rest[2:4])[0]

    @property
    def next_hop_mtu(self) -> int:
        return struct.unpack("!H", self.rest[2:4])[0]

    @property
    def is_error(self) -> bool:
        return self.type in (ICMP_DEST_UNREACH, ICMP_TIME_EXCEEDED)

    def echo_reply(self) -> IcmpMessage:
        return IcmpMessage(ICMP_ECHO_REPLY, 0, self.rest, self.data)

    def encode(self) -> bytes:
        if len(self.rest) != 4:
            raise ValueError("ICMP rest-of-header must be 4 bytes")
        body = struct.pack("!BBH", self.type, self.code, 0) + self.rest + bytes(self.data)
        csum = checksum16(body)
        return body[:2] + struct.pack("!H", csum) + body[4:]

    @classmethod
    def decode(cls, data: bytes) -> IcmpMessage:
        if len(data) < 8:
            raise DecodeError(f"ICMP message truncated ({len(data)} bytes)")
        type_, code, csum = struct.unpack_from("!BBH", data)
        return cls(type_, code, bytes(data[4:8]), bytes(data[8:]), csum, verifies(data))
