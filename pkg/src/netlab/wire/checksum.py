"""16-bit one's-complement Internet checksum."""

from __future__ import annotations

import struct


def ones_sum(data: bytes) -> int:
    """One's-complement sum of big-endian 16-bit words, folded to 16 bits."""
    if len(data) % 2:
        data = bytes(data) + b"\x00"
    total = sum(struct.unpack(f"!{len(data) // 2}H", data))
    while total >> 16:
        total = (total & 0xFFFF) + (total >> 16)
    return total


def checksum16(data: bytes) -> int:
    return ~ones_sum(data) & 0xFFFF


def verifies(data: bytes) -> bool:
    """True when a block that embeds its own checksum sums to 0xFFFF."""
    return ones_sum(data) == 0xFFFF


def incremental_update(old_checksum: int, old_word: int, new_word: int) -> int:
    """Checksum after one 16-bit header word changes (HC' = ~(~HC + ~m + m'))."""
    total = (~old_checksum & 0xFFFF) + (~old_word & 0xFFFF) + new_word
    while total >> 16:
        total = (total & 0xFFFF) + (total >> 16)
    return ~total & 0xFFFF


def pseudo_header(src, dst, protocol: int, length: int) -> bytes:
    return struct.pack("!4s4sBBH", src.packed, dst.packed, 0, protocol, length)
