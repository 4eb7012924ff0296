from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field

from .addr import Ipv4Addr
from .checksum import checksum16, ones_sum, pseudo_header
from .ethernet import DecodeError
from .ipv4 import PROTO_TCP

TCP_HEADER_LEN = 20


class TcpFlags(enum.IntFlag):
    FIN = 0x01
    SYN = 0x02
    RST = 0x04
    PSH = 0x08
    ACK = 0x10
    URG = 0x20

    def short(self) -> str:
        names = [("SYN", self.SYN), ("FIN", self.FIN), ("RST", self.RST),
                 ("PSH", self.PSH), ("ACK", self.ACK), ("URG", self.URG)]
        return ",".join(n for n, f in names if self & f) or "-"


@dataclass(frozen=True)
class TcpSegment:
    src_port: int
    dst_port: int
    seq: int
    ack: int
    flags: TcpFlags
    window: int
    payload: bytes = b""
    mss: int | None = None
    urgent_ptr: int = 0
    checksum: int | None = field(default=None, compare=False)
    checksum_ok: bool = field(default=True, compare=False)

    def options(self) -> bytes:
        if self.mss is None:
            return b""
        return struct.pack("!BBH", 2, 4, self.mss)

    @property
    def data_offset(self) -> int:
        opts = len(self.options())
        return 5 + (opts + 3) // 4

    @property
    def header_len(self) -> int:
        return self.data_offset * 4

    @property
    def seg_len(self) -> int:
        """Sequence space consumed: payload plus one each for SYN and FIN."""
        return len(self.payload) + bool(self.flags & TcpFlags.SYN) + bool(self.flags & TcpFlags.FIN)

    def encode(self, src: Ipv4Addr, dst: Ipv4Addr) -> bytes:
        opts = self.options()
        opts += b"\x00" * (-len(opts) % 4)
        head = struct.pack("!HHIIBBHHH", self.src_port, self.dst_port, self.seq & 0xFFFFFFFF,
                           self.ack & 0xFFFFFFFF, self.data_offset << 4, int(self.flags),
                           self.window, 0, self.urgent_ptr) + opts
        length = len(head) + len(self.payload)
        csum = checksum16(pseudo_header(src, dst, PROTO_TCP, length) + head + self.payload)
        return head[:16] + struct.pack("!H", csum) + head[18:] + bytes(self.payload)

    @classmethod
    def decode(cls, data: bytes, src: Ipv4Addr, dst: Ipv4Addr) -> TcpSegment:
        if len(data) < TCP_HEADER_LEN:
            raise DecodeError(f"TCP header truncated ({len(data)} bytes)")
        sport, dport, seq, ack, off, flags, window, csum, urg = struct.unpack_from("!HHIIBBHHH", data)
        hlen = (off >> 4) * 4
        if hlen < TCP_HEADER_LEN or hlen > len(data):
            raise DecodeError(f"TCP data offset {off >> 4} inconsistent with {len(data)} bytes")
        mss = None
        opts = data[TCP_HEADER_LEN:hlen]
        i = 0
        while i < len(opts):
            kind = opts[i]
            if kind == 0:
                break
            if kind == 1:
                i += 1
                continue
            if i + 1 >= len(opts) or opts[i + 1] < 2:
                raise DecodeError("malformed TCP option")
            size = opts[i + 1]
            if kind == 2 and size == 4:
                mss = struct.unpack_from("!H", opts, i + 2)[0]
            i += size
        ok = ones_sum(pseudo_header(src, dst, PROTO_TCP, len(data)) + bytes(data)) == 0xFFFF
        return cls(sport, dport, seq, ack, TcpFlags(flags & 0x3F), window,
                   bytes(data[hlen:]), mss, urg, csum, ok)
