"""UDP endpoints and the per-host demultiplexer."""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable

from ..fabric.sim import Queue
from ..wire.addr import Ipv4Addr, ip
from ..wire.ethernet import DecodeError
from ..wire.icmp import ICMP_DEST_UNREACH, UNREACH_PORT, IcmpMessage
from ..wire.ipv4 import PROTO_UDP, Ipv4Packet
from ..wire.udp import UDP_MAX_PAYLOAD, UdpDatagram
from .ports import AddressInUse, PortAllocator

if TYPE_CHECKING:
    from ..hoststack.host import Host
    from ..hoststack.interface import Interface

ANY = Ipv4Addr("0.0.0.0")


@dataclass(frozen=True)
class Datagram:
    payload: bytes
    src: Ipv4Addr
    src_port: int
    dst: Ipv4Addr
    dst_port: int
    iface: str | None
    ttl: int


@dataclass(frozen=True)
class IcmpReport:
    """An ICMP error that quoted one of our datagrams."""

    type: int
    code: int
    reporter: Ipv4Addr
    dst: Ipv4Addr
    dst_port: int
    ttl: int  # TTL of the quoted header at the reporter
    mtu: int


class UdpSocket:
    def __init__(self, stack: UdpStack):
        self.stack = stack
        self.local_ip: Ipv4Addr = ANY
        self.local_port = 0
        self.remote: tuple[Ipv4Addr, int] | None = None
        self.inbox = Queue(stack.host.sim)
        self.errors = Queue(stack.host.sim)
        self.on_datagram: Callable[[Datagram], None] | None = None
        self.closed = False
        self.sent = 0
        self.received = 0

    @property
    def bound(self) -> bool:
        return self.local_port != 0

    def bind(self, addr=ANY, port: int = 0) -> None:
        if self.bound:
            raise OSError("bind: socket already bound")
        self.stack.register(self, ip(addr), port)

    def connect(self, addr, port: int) -> None:
        self.remote = (ip(addr), port)
        if not self.bound:
            self.bind()

    def sendto(self, payload: bytes, addr, port: int, *, ttl: int = 64, iface: str | None = None) -> int:
        if self.closed:
            raise OSError("sendto on closed socket")
        if len(payload) > UDP_MAX_PAYLOAD:
            raise OSError(f"Message too long ({len(payload)} > {UDP_MAX_PAYLOAD})")
        if not self.bound:
            self.bind()
        self.stack.output(self, bytes(payload), ip(addr), port, ttl=ttl, iface=iface)
        self.sent += 1
        return len(payload)

    def send(self, payload: bytes) -> int:
        if self.remote is None:
            raise OSError("send: destination address required")
        return self.sendto(payload, *self.remote)

    async def recvfrom(self, timeout: int | None = None) -> Datagram:
        return await self.inbox.get(timeout)

    def close(self) -> None:
        if not self.closed:
            self.closed = True
            self.stack.unregister(self)


class UdpStack:
    def __init__(self, host: Host, ports: PortAllocator):
        self.host = host
        self.ports = ports
        self.sockets: dict[tuple[Ipv4Addr, int], UdpSocket] = {}
        self.no_port = 0
        self.checksum_drops = 0
        host.handlers[PROTO_UDP] = self.input
        host.icmp_listeners.append(self._icmp_error)

    def socket(self) -> UdpSocket:
        return UdpSocket(self)

    def port_in_use(self, port: int) -> bool:
        return any(p == port for _, p in self.sockets)

    def register(self, sock: UdpSocket, addr: Ipv4Addr, port: int) -> None:
        if port == 0:
            port = self.ports.allocate(self.port_in_use)
        elif (addr, port) in self.sockets or (ANY, port) in self.sockets or (
                addr == ANY and self.port_in_use(port)):
            raise AddressInUse(port)
        sock.local_ip, sock.local_port = addr, port
        self.sockets[(addr, port)] = sock

    def unregister(self, sock: UdpSocket) -> None:
        self.sockets.pop((sock.local_ip, sock.local_port), None)

    def output(self, sock: UdpSocket, payload: bytes, dst: Ipv4Addr, port: int, *,
               ttl: int, iface: str | None) -> None:
        src = sock.local_ip
        if src == ANY:
            src = self.host.interfaces[iface].ip if iface is not None else self.host.source_for(dst)
        data = UdpDatagram(sock.local_port, port, payload).encode(src, dst)
        self.host.ip_send(dst, PROTO_UDP, data, src=src, ttl=ttl, iface=iface)

    def lookup(self, dst: Ipv4Addr, port: int) -> UdpSocket | None:
        return self.sockets.get((dst, port)) or self.sockets.get((ANY, port))

    def input(self, packet: Ipv4Packet, iface: Interface | None) -> None:
        try:
            dgram = UdpDatagram.decode(packet.payload, packet.src, packet.dst)
        except DecodeError:
            self.host.counters["malformed"] += 1
            return
        if not dgram.checksum_ok:
            self.checksum_drops += 1
            self.host.counters["checksum_drops"] += 1
            return
        sock = self.lookup(packet.dst, dgram.dst_port)
        if sock is None:
            self.no_port += 1
            self.host.counters["udp_no_port"] += 1
            if not self.host.is_broadcast(packet.dst):
                self.host.icmp_error(packet, ICMP_DEST_UNREACH, UNREACH_PORT, src=packet.dst)
            return
        sock.received += 1
        meta = Datagram(dgram.payload, packet.src, dgram.src_port, packet.dst, dgram.dst_port,
                        iface.name if iface is not None else None, packet.ttl)
        if sock.on_datagram is not None:
            sock.on_datagram(meta)
        else:
            sock.inbox.put(meta)

    def _icmp_error(self, msg: IcmpMessage, packet: Ipv4Packet) -> None:
        if not msg.is_error or len(msg.data) < 28:
            return
        quoted = quoted_header(msg.data)
        if quoted is None or quoted.protocol != PROTO_UDP:
            return
        sport, dport = int.from_bytes(msg.data[20:22], "big"), int.from_bytes(msg.data[22:24], "big")
        sock = self.lookup(quoted.src, sport)
        if sock is None:
            return
        sock.errors.put(IcmpReport(msg.type, msg.code, packet.src, quoted.dst, dport, quoted.ttl,
                                   msg.next_hop_mtu))


def quoted_header(data: bytes) -> Ipv4Packet | None:
    """Parse the IP header quoted in an ICMP error, ignoring its length field."""
    if len(data) < 20:
        return None
    head = bytearray(data[:20])
    head[2:4] = (20).to_bytes(2, "big")
    try:
        return Ipv4Packet.decode(bytes(head))
    except DecodeError:
        return None
