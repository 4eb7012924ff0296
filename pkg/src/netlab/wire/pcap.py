"""Classic libpcap container (version 2.4, microsecond timestamps)."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import BinaryIO

PCAP_MAGIC = 0xA1B2C3D4
PCAP_SWAPPED_MAGIC = 0xD4C3B2A1
LINKTYPE_ETHERNET = 1
GLOBAL_HEADER_LEN = 24
RECORD_HEADER_LEN = 16


class PcapError(ValueError):
    pass


@dataclass(frozen=True)
class PcapRecord:
    ts_sec: int
    ts_usec: int
    data: bytes
    orig_len: int | None = None

    def __post_init__(self):
        if self.orig_len is None:
            object.__setattr__(self, "orig_len", len(self.data))

    @property
    def incl_len(self) -> int:
        return len(self.data)

    @property
    def timestamp(self) -> float:
        return self.ts_sec + self.ts_usec / 1e6

    @property
    def ts_us(self) -> int:
        return self.ts_sec * 1_000_000 + self.ts_usec

    @classmethod
    def at_ns(cls, time_ns: int, data: bytes) -> PcapRecord:
        usec = time_ns // 1000
        return cls(usec // 1_000_000, usec % 1_000_000, bytes(data))


@dataclass
class PcapCapture:
    records: list[PcapRecord] = field(default_factory=list)
    snaplen: int = 65535
    linktype: int = LINKTYPE_ETHERNET
    version: tuple[int, int] = (2, 4)

    def __len__(self) -> int:
        return len(self.records)

    def append(self, record: PcapRecord) -> None:
        if self.records and record.ts_us < self.records[-1].ts_us:
            raise PcapError("records must be appended in time order")
        self.records.append(record)

    def to_bytes(self) -> bytes:
        out = [struct.pack("<IHHiIII", PCAP_MAGIC, self.version[0], self.version[1], 0, 0,
                           self.snaplen, self.linktype)]
        for rec in self.records:
            if not rec.incl_len <= rec.orig_len <= self.snaplen:
                raise PcapError("record lengths violate incl_len <= orig_len <= snaplen")
            out.append(struct.pack("<IIII", rec.ts_sec, rec.ts_usec, rec.incl_len, rec.orig_len))
            out.append(rec.data)
        return b"".join(out)

    @classmethod
    def from_bytes(cls, blob: bytes) -> PcapCapture:
        if len(blob) < GLOBAL_HEADER_LEN:
            raise PcapError("file shorter than the pcap global header")
        (magic,) = struct.unpack_from("<I", blob)
        if magic == PCAP_MAGIC:
            order = "<"
        elif magic == PCAP_SWAPPED_MAGIC:
            order = ">"
        else:
            raise PcapError(f"bad pcap magic 0x{magic:08x}")
        _, major, minor, _, _, snaplen, linktype = struct.unpack_from(order + "IHHiIII", blob)
        cap = cls(snaplen=snaplen, linktype=linktype, version=(major, minor))
        pos = GLOBAL_HEADER_LEN
        while pos < len(blob):
            if pos + RECORD_HEADER_LEN > len(blob):
                raise PcapError(f"truncated record header at offset {pos}")
            sec, usec, incl, orig = struct.unpack_from(order + "IIII", blob, pos)
            pos += RECORD_HEADER_LEN
            if pos + incl > len(blob):
                raise PcapError(f"truncated record data at offset {pos}")
            cap.records.append(PcapRecord(sec, usec, blob[pos:pos + incl], orig))
            pos += incl
        return cap


def pcap_write(capture: PcapCapture, sink: BinaryIO) -> int:
    data = capture.to_bytes()
    sink.write(data)
    return len(data)


def pcap_read(source: BinaryIO) -> PcapCapture:
    return PcapCapture.from_bytes(source.read())


def read_file(path) -> PcapCapture:
    with open(path, "rb") as fh:
        return pcap_read(fh)


def write_file(capture: PcapCapture, path) -> None:
    with open(path, "wb") as fh:
        pcap_write(capture, fh)
