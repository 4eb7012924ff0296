from __future__ import annotations

import struct
from dataclasses import dataclass

from .addr import Ipv4Addr, MacAddr
from .ethernet import DecodeError

ARP_LEN = 28
ARP_REQUEST = 1
ARP_REPLY = 2

_FMT = "!HHBBH6s4s6s4s"


@dataclass(frozen=True)
class ArpMessage:
    oper: int
    sha: MacAddr
    spa: Ipv4Addr
    tha: MacAddr
    tpa: Ipv4Addr

    def encode(self) -> bytes:
        if self.oper not in (ARP_REQUEST, ARP_REPLY):
            raise ValueError(f"ARP operation {self.oper} not supported")
        return struct.pack(_FMT, 1, 0x0800, 6, 4, self.oper,
                           self.sha.octets, self.spa.packed, self.tha.octets, self.tpa.packed)

    @classmethod
    def decode(cls, data: bytes) -> ArpMessage:
        if len(data) < ARP_LEN:
            raise DecodeError(f"ARP message truncated ({len(data)} bytes)")
        htype, ptype, hlen, plen, oper, sha, spa, tha, tpa = struct.unpack_from(_FMT, data)
        if (htype, ptype, hlen, plen) != (1, 0x0800, 6, 4):
            raise DecodeError("ARP message is not Ethernet/IPv4")
        if oper not in (ARP_REQUEST, ARP_REPLY):
            raise DecodeError(f"unsupported ARP operation {oper}")
        return cls(oper, MacAddr(sha), Ipv4Addr(spa), MacAddr(tha), Ipv4Addr(tpa))

    @property
    def is_request(self) -> bool:
        return self.oper == ARP_REQUEST
