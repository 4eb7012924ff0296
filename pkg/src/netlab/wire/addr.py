"""Link and network layer addresses.

IPv4 addresses are plain :class:`ipaddress.IPv4Address` values; this module
adds the MAC address type, a contiguous subnet mask type and CIDR helpers.
"""

from __future__ import annotations

import ipaddress
import re
from dataclasses import dataclass

Ipv4Addr = ipaddress.IPv4Address

_MAC_RE = re.compile(r"^([0-9a-fA-F]{1,2})([:-][0-9a-fA-F]{1,2}){5}$")


class AddressError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class MacAddr:
    octets: bytes

    def __post_init__(self):
        if len(self.octets) != 6:
            raise AddressError(f"MAC address needs 6 octets, got {len(self.octets)}")

    @classmethod
    def parse(cls, text: str) -> MacAddr:
        text = text.strip()
        if not _MAC_RE.match(text):
            raise AddressError(f"malformed MAC address {text!r}")
        return cls(bytes(int(p, 16) for p in re.split(r"[:-]", text)))

    @property
    def is_broadcast(self) -> bool:
        return self.octets == b"\xff" * 6

    @property
    def is_multicast(self) -> bool:
        return bool(self.octets[0] & 0x01)

    def __bytes__(self) -> bytes:
        return self.octets

    def __str__(self) -> str:
        return ":".join(f"{b:02x}" for b in self.octets)

    def __repr__(self) -> str:
        return f"MacAddr('{self}')"


BROADCAST_MAC = MacAddr(b"\xff" * 6)
ZERO_MAC = MacAddr(b"\x00" * 6)


def ip(value) -> Ipv4Addr:
    """Coerce a string, int or address into an IPv4 address."""
    if isinstance(value, Ipv4Addr):
        return value
    try:
        return Ipv4Addr(value)
    except ValueError as exc:
        raise AddressError(str(exc)) from None


@dataclass(frozen=True, order=True)
class SubnetMask:
    prefixlen: int

    def __post_init__(self):
        if not 0 <= self.prefixlen <= 32:
            raise AddressError(f"prefix length {self.prefixlen} outside 0..32")

    @classmethod
    def parse(cls, text: str) -> SubnetMask:
        text = text.strip()
        if text.startswith("/"):
            text = text[1:]
        if text.isdigit():
            return cls(int(text))
        return cls.from_int(int(ip(text)))

    @classmethod
    def from_int(cls, value: int) -> SubnetMask:
        inverted = ~value & 0xFFFFFFFF
        # contiguous ones then zeros <=> inverted + 1 is a power of two
        if inverted & (inverted + 1):
            raise AddressError(f"non-contiguous mask {Ipv4Addr(value)}")
        return cls(32 - inverted.bit_length())

    @property
    def value(self) -> int:
        return (0xFFFFFFFF << (32 - self.prefixlen)) & 0xFFFFFFFF

    @property
    def address(self) -> Ipv4Addr:
        return Ipv4Addr(self.value)

    def __str__(self) -> str:
        return str(self.address)


def parse_cidr(text: str) -> tuple[Ipv4Addr, SubnetMask]:
    """Parse ``A.B.C.D/len`` (or ``A.B.C.D/mask``) into address and mask."""
    if "/" not in text:
        raise AddressError(f"missing prefix in {text!r}")
    addr, _, mask = text.partition("/")
    return ip(addr), SubnetMask.parse(mask)


def subnet_of(addr, mask: SubnetMask) -> Ipv4Addr:
    return Ipv4Addr(int(ip(addr)) & mask.value)


def broadcast_of(addr, mask: SubnetMask) -> Ipv4Addr:
    return Ipv4Addr(int(ip(addr)) | (~mask.value & 0xFFFFFFFF))


def same_subnet(a, b, mask: SubnetMask) -> bool:
    return int(ip(a)) & mask.value == int(ip(b)) & mask.value


def classful_mask(addr) -> SubnetMask:
    first = int(ip(addr)) >> 24
    if first < 128:
        return SubnetMask(8)
    if first < 192:
        return SubnetMask(16)
    return SubnetMask(24)


def subnet_plan(block, block_mask: SubnetMask, subnet_mask: SubnetMask) -> tuple[int, int]:
    """Number of subnets and usable hosts per subnet when subnetting a block."""
    if subnet_mask.prefixlen < block_mask.prefixlen:
        raise AddressError("subnet mask shorter than block mask")
    host_bits = 32 - subnet_mask.prefixlen
    hosts = 2 ** host_bits - 2 if host_bits >= 2 else 0
    return 2 ** (subnet_mask.prefixlen - block_mask.prefixlen), hosts
