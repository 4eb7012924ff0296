"""Bulk-transfer measurement tool modelled on iperf (UDP and TCP modes)."""

from __future__ import annotations

import struct
from dataclasses import dataclass

from ..fabric.sim import SECOND
from ..hoststack.host import Host
from ..wire.addr import Ipv4Addr, ip

DEFAULT_PORT = 5001
UDP_PAYLOAD = 1470
DEFAULT_DURATION = 10 * SECOND
DEFAULT_UDP_RATE = 1_000_000
TCP_WRITE = 8192
RULE = "-" * 60


@dataclass
class IperfReport:
    role: str  # "client" or "server"
    protocol: str  # "udp" or "tcp"
    peer: Ipv4Addr | None
    bytes: int = 0
    count: int = 0  # datagrams, or data segments for TCP
    duration: int = 0  # ns
    mss: int | None = None
    error: str | None = None

    @property
    def throughput(self) -> float:
        """Bits per second; 0 for an empty interval."""
        return self.bytes * 8 * SECOND / self.duration if self.duration else 0.0

    def line(self) -> str:
        secs = self.duration / SECOND
        return (f"[  3]  0.0-{secs:.1f} sec  {_size(self.bytes)}  {_rate(self.throughput)}")


def _size(n: int) -> str:
    if n >= 1 << 20:
        return f"{n / (1 << 20):.2f} MBytes"
    if n >= 1 << 10:
        return f"{n / (1 << 10):.1f} KBytes"
    return f"{n} Bytes"


def _rate(bps: float) -> str:
    if bps >= 1e6:
        return f"{bps / 1e6:.2f} Mbits/sec"
    if bps >= 1e3:
        return f"{bps / 1e3:.1f} Kbits/sec"
    return f"{bps:.0f} bits/sec"


def udp_datagram_count(duration: int, rate: int) -> int:
    return duration * rate // (UDP_PAYLOAD * 8 * SECOND)


class IperfServer:
    """Passive receiver; its report reflects everything seen so far."""

    def __init__(self, host: Host, *, udp: bool = False, port: int = DEFAULT_PORT):
        self.host = host
        self.udp = udp
        self.port = port
        self.reports: list[IperfReport] = []
        self._first: int | None = None
        self._last: int | None = None
        self._udp_report: IperfReport | None = None
        if udp:
            self.sock = host.udp.socket()
            self.sock.bind(port=port)
            self.sock.on_datagram = self._on_datagram
        else:
            self.sock = host.tcp.socket()
            self.sock.bind(port=port)
            self.sock.listen(5)
            host.sim.spawn(self._accept_loop(), f"iperf-server:{host.name}")
        host.print(RULE)
        host.print(f"Server listening on {'UDP' if udp else 'TCP'} port {port}")
        if udp:
            host.print(f"Receiving {UDP_PAYLOAD} byte datagrams")
        host.print(RULE)

    def _on_datagram(self, dgram) -> None:
        now = self.host.sim.now
        if self._udp_report is None:
            self._udp_report = IperfReport("server", "udp", dgram.src)
            self.reports.append(self._udp_report)
            self._first = now
            self.host.print(f"[  3] local {dgram.dst} port {self.port} connected with "
                            f"{dgram.src} port {dgram.src_port}")
        rep = self._udp_report
        rep.bytes += len(dgram.payload)
        rep.count += 1
        self._last = now
        rep.duration = self._last - self._first
        if len(dgram.payload) >= 4 and struct.unpack_from("!i", dgram.payload)[0] < 0:
            self.host.print(rep.line())
            self.host.print(f"[  3] Received {rep.count} datagrams")
            self._udp_report = None

    async def _accept_loop(self) -> None:
        while True:
            conn = await self.sock.accept()
            self.host.sim.spawn(self._serve(conn), f"iperf-conn:{self.host.name}")

    async def _serve(self, conn) -> None:
        c = conn.conn
        rep = IperfReport("server", "tcp", c.remote[0], mss=c.mss)
        self.reports.append(rep)
        self.host.print(f"[  4] local {c.local[0]} port {c.local[1]} connected with "
                        f"{c.remote[0]} port {c.remote[1]}")
        start = self.host.sim.now
        while True:
            chunk = await conn.recv()
            if not chunk:
                break
            rep.bytes += len(chunk)
            rep.duration = self.host.sim.now - start
        rep.count = c.stats["data_segments_received"]
        conn.close()
        self.host.print(rep.line().replace("[  3]", "[  4]"))

    def close(self) -> None:
        self.sock.close()


async def iperf_udp_client(host: Host, dst, *, port: int = DEFAULT_PORT,
                           duration: int = DEFAULT_DURATION, rate: int = DEFAULT_UDP_RATE,
                           n_bytes: int | None = None) -> IperfReport:
    dst = ip(dst)
    sim = host.sim
    sock = host.udp.socket()
    sock.bind()
    gap = UDP_PAYLOAD * 8 * SECOND // rate
    count = -(-n_bytes // UDP_PAYLOAD) if n_bytes is not None else udp_datagram_count(duration, rate)
    host.print(RULE)
    host.print(f"Client connecting to {dst}, UDP port {port}")
    host.print(f"Sending {UDP_PAYLOAD} byte datagrams")
    host.print(RULE)
    rep = IperfReport("client", "udp", dst)
    start = sim.now
    for i in range(count):
        # the last datagram carries a negative sequence number to mark the end
        seq = -(i + 1) if i == count - 1 else i + 1
        elapsed = sim.now - start
        head = struct.pack("!iII", seq, elapsed // SECOND, elapsed % SECOND // 1000)
        sock.sendto(head + bytes(UDP_PAYLOAD - len(head)), dst, port)
        rep.bytes += UDP_PAYLOAD
        rep.count += 1
        if i < count - 1:
            await sim.sleep(gap)
    rep.duration = max(count * gap, 1)
    sock.close()
    host.print(rep.line())
    host.print(f"[  3] Sent {rep.count} datagrams")
    return rep


async def iperf_tcp_client(host: Host, dst, *, port: int = DEFAULT_PORT,
                           duration: int = DEFAULT_DURATION, n_bytes: int | None = None,
                           report_mss: bool = False) -> IperfReport:
    dst = ip(dst)
    sim = host.sim
    sock = host.tcp.socket()
    rep = IperfReport("client", "tcp", dst)
    host.print(RULE)
    host.print(f"Client connecting to {dst}, TCP port {port}")
    host.print(RULE)
    try:
        await sock.connect(dst, port)
    except ConnectionRefusedError:
        rep.error = "connect failed: Connection refused"
        host.print(rep.error)
        return rep
    except TimeoutError:
        rep.error = "connect failed: Connection timed out"
        host.print(rep.error)
        return rep
    conn = sock.conn
    rep.mss = conn.mss
    host.print(f"[  3] local {conn.local[0]} port {conn.local[1]} connected with {dst} port {port}")
    start = sim.now
    try:
        if n_bytes is not None:
            sock.send(bytes(n_bytes))
        else:
            end = start + duration
            while sim.now < end:
                await conn.writable(TCP_WRITE * 8)
                if conn.error is not None:
                    break
                sock.send(bytes(TCP_WRITE))
        await conn.drained()
    except (ConnectionResetError, BrokenPipeError) as exc:
        rep.error = str(exc)
    rep.bytes = conn.stats["bytes_acked"]
    rep.count = conn.stats["data_segments_sent"]
    rep.duration = sim.now - start
    sock.close()
    host.print(rep.line())
    if report_mss:
        host.print(f"[  3] MSS size {conn.mss} bytes (MTU {conn.mss + 40} bytes, ethernet)")
    return rep
