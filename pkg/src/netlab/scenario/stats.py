"""Capture statistics: filtered counts, IO graphs, byte ledgers and TCP phases."""

from __future__ import annotations

import io
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from ..wire.dissect import Dissection, dissect
from ..wire.pcap import PcapCapture
from ..wire.tcp import TcpFlags
from .filters import compile_filter

NS_PER_US = 1000


@dataclass(frozen=True)
class Frame:
    time_ns: int
    d: Dissection


def load(source: PcapCapture | str | Path | bytes) -> list[Frame]:
    if isinstance(source, (str, Path)):
        source = Path(source).read_bytes()
    if isinstance(source, (bytes, bytearray)):
        source = PcapCapture.from_bytes(bytes(source))
    return [Frame(rec.ts_us * NS_PER_US, dissect(rec.data)) for rec in source.records]


def select(frames: list[Frame], expr: str = "", until_ns: int | None = None) -> list[Frame]:
    pred = compile_filter(expr)
    return [f for f in frames if (until_ns is None or f.time_ns <= until_ns) and pred(f.d)]


def count(frames: list[Frame], expr: str = "", until_ns: int | None = None) -> int:
    return len(select(frames, expr, until_ns))


@dataclass(frozen=True)
class Bin:
    start_ns: int
    packets: int
    bytes: int


def io_graph(frames: list[Frame], expr: str = "", interval_ns: int = 1_000_000_000) -> list[Bin]:
    """Bins of ``interval_ns`` from the first to the last frame of the capture.

    Bin starts are relative to the first captured frame, as in Wireshark.
    """
    if interval_ns <= 0:
        raise ValueError("interval must be positive")
    if not frames:
        return []
    origin = frames[0].time_ns
    n_bins = (frames[-1].time_ns - origin) // interval_ns + 1
    packets = [0] * n_bins
    octets = [0] * n_bins
    for f in select(frames, expr):
        i = (f.time_ns - origin) // interval_ns
        packets[i] += 1
        octets[i] += f.d.length
    return [Bin(i * interval_ns, packets[i], octets[i]) for i in range(n_bins)]


def io_graph_csv(bins: list[Bin]) -> str:
    out = io.StringIO()
    out.write("start_s,packets,bytes\n")
    for b in bins:
        out.write(f"{b.start_ns / 1e9:.6f},{b.packets},{b.bytes}\n")
    return out.getvalue()


LEDGER_KEYS = ("ethernet", "arp", "ip", "transport", "payload", "padding")


def overhead(frames: list[Frame], expr: str = "") -> dict[str, int]:
    """Sum header, payload and padding bytes; ``discrepancy`` should be 0.

    Headers are sized from the decoded fields (TCP data offset, IP header
    length) rather than by subtraction, so a mis-framed capture shows up as a
    non-zero discrepancy.
    """
    totals = Counter(dict.fromkeys(LEDGER_KEYS, 0))
    frame_bytes = 0
    for f in select(frames, expr):
        frame_bytes += f.d.length
        totals.update(f.d.header_bytes())
    result = {k: totals[k] for k in LEDGER_KEYS}
    result["frames"] = frame_bytes
    result["discrepancy"] = frame_bytes - sum(result[k] for k in LEDGER_KEYS)
    return result


def format_overhead(ledger: dict[str, int]) -> str:
    lines = [f"{k:<12}{ledger[k]:>10}" for k in LEDGER_KEYS]
    lines.append(f"{'total':<12}{ledger['frames']:>10}")
    lines.append(f"{'discrepancy':<12}{ledger['discrepancy']:>10}")
    return "\n".join(lines) + "\n"


def tcp_phases(frames: list[Frame], port: int | None = None) -> dict[str, int]:
    """Count handshake, data and teardown segments as seen on one tap.

    handshake: SYN and SYN-ACK segments plus the first pure ACK that
    acknowledges each SYN-ACK. teardown: FIN segments plus the first ACK
    acknowledging each FIN. data: segments carrying payload.
    """
    segs = [f.d for f in frames if f.d.tcp is not None
            and (port is None or port in (f.d.tcp.src_port, f.d.tcp.dst_port))]
    phases = {"handshake": 0, "data": 0, "teardown": 0, "other": 0}
    awaiting: dict[tuple, int] = {}  # (flow direction expected to ack, ack value) -> phase
    for d in segs:
        t = d.tcp
        flow = (d.ip.src, t.src_port, d.ip.dst, t.dst_port)
        reverse = (d.ip.dst, t.dst_port, d.ip.src, t.src_port)
        flags = t.flags
        if t.payload:
            phases["data"] += 1
        elif flags & TcpFlags.SYN:
            phases["handshake"] += 1
            if flags & TcpFlags.ACK:
                awaiting[(reverse, (t.seq + 1) & 0xFFFFFFFF)] = "handshake"
        elif flags & TcpFlags.FIN:
            phases["teardown"] += 1
        elif flags & TcpFlags.ACK and (flow, t.ack) in awaiting:
            phases[awaiting.pop((flow, t.ack))] += 1
        else:
            phases["other"] += 1
        if flags & TcpFlags.FIN:
            if t.payload:
                phases["teardown"] += 1
            awaiting[(reverse, (t.seq + len(t.payload) + 1) & 0xFFFFFFFF)] = "teardown"
    return phases


def loop_violations(frames: list[Frame]) -> list[str]:
    """IP packets that cross one tap twice from the same sender.

    A datagram hairpinned by a router legitimately reappears with a different
    source MAC; the same (sender MAC, src, dst, id, protocol, offset) seen twice
    means the packet came back around a forwarding loop.
    """
    seen: set[tuple] = set()
    bad = []
    for f in frames:
        p = f.d.ip
        if p is None:
            continue
        key = (f.d.eth_src, p.src, p.dst, p.identification, p.protocol, p.fragment_offset)
        if key in seen:
            bad.append(f"{p.src} -> {p.dst} id {p.identification} ttl {p.ttl} at {f.time_ns / 1e9:.6f}s")
        seen.add(key)
    return bad


@dataclass(frozen=True)
class SeqRange:
    flow: tuple
    isn: int
    first: int  # absolute sequence number of the first data byte
    last: int   # absolute sequence number of the last data byte

    def relative(self) -> tuple[int, int]:
        """The same range counted from the ISN, as Wireshark shows it."""
        return ((self.first - self.isn) & 0xFFFFFFFF, (self.last - self.isn) & 0xFFFFFFFF)


def tcp_seq_ranges(frames: list[Frame], port: int | None = None) -> list[SeqRange]:
    """Data-byte sequence range of each TCP direction that carried payload."""
    isn: dict[tuple, int] = {}
    span: dict[tuple, list[int]] = {}
    for f in frames:
        d = f.d
        t = d.tcp
        if t is None or (port is not None and port not in (t.src_port, t.dst_port)):
            continue
        flow = (d.ip.src, t.src_port, d.ip.dst, t.dst_port)
        if t.flags & TcpFlags.SYN:
            isn.setdefault(flow, t.seq)
        if t.payload and flow in isn:
            lo = (t.seq - isn[flow]) & 0xFFFFFFFF
            hi = lo + len(t.payload) - 1
            cur = span.setdefault(flow, [lo, hi])
            cur[0], cur[1] = min(cur[0], lo), max(cur[1], hi)
    return [SeqRange(flow, isn[flow], (isn[flow] + lo) & 0xFFFFFFFF, (isn[flow] + hi) & 0xFFFFFFFF)
            for flow, (lo, hi) in span.items()]
