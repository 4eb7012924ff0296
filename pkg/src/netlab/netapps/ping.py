"""ICMP echo client in the style of the Linux ``ping`` tool."""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field

from ..fabric.sim import SECOND
from ..hoststack.host import FragmentationNeeded, Host
from ..routing import NetworkUnreachable
from ..wire.addr import Ipv4Addr, ip
from ..wire.icmp import ICMP_DEST_UNREACH, ICMP_ECHO_REPLY, ICMP_TIME_EXCEEDED, IcmpMessage
from ..wire.ipv4 import Ipv4Packet
from ..transport.udp import quoted_header

_ERROR_TEXT = {
    (ICMP_DEST_UNREACH, 0): "Destination Net Unreachable",
    (ICMP_DEST_UNREACH, 1): "Destination Host Unreachable",
    (ICMP_DEST_UNREACH, 3): "Destination Port Unreachable",
    (ICMP_DEST_UNREACH, 4): "Frag needed",
    (ICMP_TIME_EXCEEDED, 0): "Time to live exceeded",
}


@dataclass
class Probe:
    seq: int
    sent_at: int
    rtt: int | None = None  # ns
    ttl: int | None = None
    error: str | None = None


@dataclass
class PingReport:
    dst: Ipv4Addr
    size: int
    identifier: int
    probes: list[Probe] = field(default_factory=list)
    local_error: str | None = None

    @property
    def sent(self) -> int:
        return len(self.probes)

    @property
    def received(self) -> int:
        return sum(p.rtt is not None for p in self.probes)

    @property
    def loss_pct(self) -> float:
        return 100.0 * (self.sent - self.received) / self.sent if self.sent else 0.0

    @property
    def rtts(self) -> list[int]:
        return [p.rtt for p in self.probes if p.rtt is not None]

    @property
    def rtt_min(self) -> int | None:
        return min(self.rtts) if self.rtts else None

    @property
    def rtt_max(self) -> int | None:
        return max(self.rtts) if self.rtts else None

    @property
    def rtt_avg(self) -> float | None:
        return statistics.fmean(self.rtts) if self.rtts else None

    @property
    def success(self) -> bool:
        return self.sent > 0 and self.received == self.sent


def _ms(ns: float) -> str:
    return f"{ns / 1e6:.3f}"


def format_summary(report: PingReport, interval: int) -> list[str]:
    span = (report.sent - 1) * interval // 1_000_000 if report.sent else 0
    lines = [f"--- {report.dst} ping statistics ---",
             f"{report.sent} packets transmitted, {report.received} received, "
             f"{report.loss_pct:.0f}% packet loss, time {span}ms"]
    if report.rtts:
        mdev = statistics.pstdev(report.rtts)
        lines.append(f"rtt min/avg/max/mdev = {_ms(report.rtt_min)}/{_ms(report.rtt_avg)}/"
                     f"{_ms(report.rtt_max)}/{_ms(mdev)} ms")
    return lines


async def ping(host: Host, dst, *, count: int = 4, size: int = 56, interval: int = SECOND,
               timeout: int = SECOND, df: bool = False, ttl: int = 64, quiet: bool = False) -> PingReport:
    dst = ip(dst)
    sim = host.sim
    ident = next(host.icmp_ids) & 0xFFFF
    report = PingReport(dst, size, ident)
    by_seq: dict[int, Probe] = {}
    say = (lambda text: None) if quiet else host.print
    # like the real tool, stop as soon as the final probe is answered
    settled = sim.future()

    def settle(seq: int) -> None:
        if seq == count and not settled.done():
            settled.set_result()

    def on_icmp(msg: IcmpMessage, packet: Ipv4Packet) -> None:
        if msg.type == ICMP_ECHO_REPLY and msg.identifier == ident:
            probe = by_seq.get(msg.sequence)
            if probe is None or probe.rtt is not None or sim.now - probe.sent_at > timeout:
                return
            probe.rtt = sim.now - probe.sent_at
            probe.ttl = packet.ttl
            say(f"{len(msg.data) + 8} bytes from {packet.src}: icmp_seq={msg.sequence} "
                f"ttl={packet.ttl} time={_ms(probe.rtt)} ms")
            settle(msg.sequence)
        elif msg.is_error and len(msg.data) >= 28:
            quoted = quoted_header(msg.data)
            if quoted is None or quoted.dst != dst:
                return
            inner = msg.data[20:28]
            if inner[0] != 8 or int.from_bytes(inner[4:6], "big") != ident:
                return
            seq = int.from_bytes(inner[6:8], "big")
            probe = by_seq.get(seq)
            if probe is None or probe.error is not None:
                return
            probe.error = _ERROR_TEXT.get((msg.type, msg.code), f"type {msg.type} code {msg.code}")
            if msg.type == ICMP_DEST_UNREACH and msg.code == 4:
                probe.error += f" (mtu = {msg.next_hop_mtu})"
            say(f"From {packet.src} icmp_seq={seq} {probe.error}")
            settle(seq)

    host.icmp_listeners.append(on_icmp)
    say(f"PING {dst} ({dst}) {size}({size + 28}) bytes of data.")
    payload = bytes((i + 8) & 0xFF for i in range(size))
    try:
        for seq in range(1, count + 1):
            probe = Probe(seq, sim.now)
            report.probes.append(probe)
            by_seq[seq] = probe
            try:
                host.echo_request(dst, ident, seq, payload, df=df, ttl=ttl)
            except NetworkUnreachable:
                probe.error = "Network is unreachable"
                say("connect: Network is unreachable")
            except FragmentationNeeded as exc:
                probe.error = f"Message too long, mtu={exc.mtu}"
                say(f"ping: local error: message too long, mtu={exc.mtu}")
            if seq < count:
                await sim.sleep(interval)
            elif probe.error is None:
                sim.call_later(timeout, settle, seq)
                await settled
    finally:
        host.icmp_listeners.remove(on_icmp)
    say("")
    for line in format_summary(report, interval):
        say(line)
    return report
