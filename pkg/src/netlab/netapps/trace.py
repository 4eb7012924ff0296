"""Path tools built on TTL expiry and the DF bit: traceroute and MTU discovery."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..fabric.sim import SECOND
from ..hoststack.host import FragmentationNeeded, Host
from ..routing import NetworkUnreachable
from ..wire.addr import Ipv4Addr, ip
from ..wire.icmp import ICMP_DEST_UNREACH, ICMP_ECHO_REPLY, UNREACH_FRAG_NEEDED, UNREACH_PORT, IcmpMessage
from ..wire.ipv4 import Ipv4Packet
from ..transport.udp import quoted_header

BASE_PORT = 33434
PROBE_PAYLOAD = 32


@dataclass
class Hop:
    ttl: int
    responders: list[Ipv4Addr | None] = field(default_factory=list)
    rtts: list[int | None] = field(default_factory=list)
    reached: bool = False

    @property
    def responder(self) -> Ipv4Addr | None:
        return next((r for r in self.responders if r is not None), None)


@dataclass
class TracerouteReport:
    dst: Ipv4Addr
    hops: list[Hop] = field(default_factory=list)

    @property
    def reached(self) -> bool:
        return bool(self.hops) and self.hops[-1].reached

    @property
    def probes_sent(self) -> int:
        return sum(len(h.rtts) for h in self.hops)

    @property
    def path(self) -> list[Ipv4Addr | None]:
        return [h.responder for h in self.hops]


def format_hop(hop: Hop) -> str:
    parts = [f"{hop.ttl:2d} "]
    last = None
    for responder, rtt in zip(hop.responders, hop.rtts):
        if rtt is None:
            parts.append(" *")
            continue
        if responder != last:
            parts.append(f" {responder}")
            last = responder
        parts.append(f"  {rtt / 1e6:.3f} ms")
    return "".join(parts)


async def traceroute(host: Host, dst, *, max_ttl: int = 30, probes: int = 3,
                     timeout: int = SECOND) -> TracerouteReport:
    dst = ip(dst)
    sim = host.sim
    report = TracerouteReport(dst)
    sock = host.udp.socket()
    sock.bind()
    host.print(f"traceroute to {dst} ({dst}), {max_ttl} hops max, {20 + 8 + PROBE_PAYLOAD} byte packets")
    port = BASE_PORT
    try:
        for ttl in range(1, max_ttl + 1):
            hop = Hop(ttl)
            report.hops.append(hop)
            for _ in range(probes):
                sent_at = sim.now
                try:
                    sock.sendto(bytes(PROBE_PAYLOAD), dst, port, ttl=ttl)
                except NetworkUnreachable:
                    host.print("connect: Network is unreachable")
                    return report
                answer = None
                deadline = sim.now + timeout
                while answer is None and sim.now < deadline:
                    try:
                        err = await sock.errors.get(deadline - sim.now)
                    except TimeoutError:
                        break
                    if err.dst == dst and err.dst_port == port:
                        answer = err
                hop.responders.append(answer.reporter if answer else None)
                hop.rtts.append(sim.now - sent_at if answer else None)
                if answer is not None and answer.type == ICMP_DEST_UNREACH and answer.code == UNREACH_PORT:
                    hop.reached = True
                port += 1
            host.print(format_hop(hop))
            if hop.reached:
                break
    finally:
        sock.close()
    return report


@dataclass
class MtuReport:
    dst: Ipv4Addr
    mtu: int
    probes: list[tuple[int, bool]] = field(default_factory=list)


async def mtu_discover(host: Host, dst, *, low: int = 68, high: int = 65535,
                       timeout: int = SECOND) -> MtuReport:
    """Binary search for the largest DF-marked datagram that reaches ``dst``."""
    dst = ip(dst)
    sim = host.sim
    ident = next(host.icmp_ids) & 0xFFFF
    waiters: dict[int, object] = {}

    def on_icmp(msg: IcmpMessage, packet: Ipv4Packet) -> None:
        if msg.type == ICMP_ECHO_REPLY and msg.identifier == ident:
            seq = msg.sequence
        elif msg.type == ICMP_DEST_UNREACH and msg.code == UNREACH_FRAG_NEEDED:
            quoted = quoted_header(msg.data)
            inner = msg.data[20:28]
            if quoted is None or len(inner) < 8 or int.from_bytes(inner[4:6], "big") != ident:
                return
            seq = int.from_bytes(inner[6:8], "big")
        else:
            return
        fut = waiters.pop(seq, None)
        if fut is not None:
            fut.set_result(msg.type == ICMP_ECHO_REPLY)

    host.icmp_listeners.append(on_icmp)
    report = MtuReport(dst, low)
    try:
        seq = 0
        while low < high:
            mid = (low + high + 1) // 2
            seq += 1
            fut = sim.future()
            waiters[seq] = fut
            try:
                host.echo_request(dst, ident, seq, bytes(mid - 28), df=True)
                ok = await sim.wait_for(fut, timeout)
            except FragmentationNeeded:
                ok = False
            except TimeoutError:
                ok = False
            waiters.pop(seq, None)
            report.probes.append((mid, ok))
            if ok:
                low = mid
            else:
                high = mid - 1
    finally:
        host.icmp_listeners.remove(on_icmp)
    report.mtu = low
    host.print(f"mtu-discover {dst}: path MTU {low} bytes ({len(report.probes)} probes)")
    return report
