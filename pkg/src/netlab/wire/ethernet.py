from __future__ import annotations

import struct
from dataclasses import dataclass

from .addr import MacAddr

ETH_HEADER_LEN = 14
ETH_MIN_FRAME = 60
ETH_MIN_PAYLOAD = ETH_MIN_FRAME - ETH_HEADER_LEN

ETHERTYPE_IPV4 = 0x0800
ETHERTYPE_ARP = 0x0806
KNOWN_ETHERTYPES = (ETHERTYPE_IPV4, ETHERTYPE_ARP)


class DecodeError(ValueError):
    """Raised when bytes cannot be parsed as the requested protocol unit."""


@dataclass(frozen=True)
class EthernetFrame:
    dst: MacAddr
    src: MacAddr
    ethertype: int
    payload: bytes

    def encode(self) -> bytes:
        head = struct.pack("!6s6sH", self.dst.octets, self.src.octets, self.ethertype)
        body = bytes(self.payload)
        if len(body) < ETH_MIN_PAYLOAD:
            body += b"\x00" * (ETH_MIN_PAYLOAD - len(body))
        return head + body

    @classmethod
    def decode(cls, data: bytes) -> EthernetFrame:
        if len(data) < ETH_HEADER_LEN:
            raise DecodeError(f"frame of {len(data)} bytes is shorter than an Ethernet header")
        dst, src, ethertype = struct.unpack_from("!6s6sH", data)
        if ethertype not in KNOWN_ETHERTYPES:
            raise DecodeError(f"unknown ethertype 0x{ethertype:04x}")
        # padding stays in the payload; inner layers recover their own length
        return cls(MacAddr(dst), MacAddr(src), ethertype, bytes(data[ETH_HEADER_LEN:]))


def encode_frame(frame: EthernetFrame) -> bytes:
    return frame.encode()


def decode_frame(data: bytes) -> EthernetFrame:
    return EthernetFrame.decode(data)
