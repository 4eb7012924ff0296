"""A network node: interfaces, ARP, IPv4 input/output/forwarding and ICMP.

Plain workstations and routers share this class; a router is a host with
forwarding switched on.
"""

from __future__ import annotations

import itertools
import logging
from collections import Counter
from typing import Callable

from ..fabric.link import FrameTooLong, Port
from ..fabric.sim import SECOND, Simulator
from ..routing import NetworkUnreachable, Origin, RouteError, RoutingTable
from ..wire.addr import BROADCAST_MAC, AddressError, Ipv4Addr, MacAddr, SubnetMask, classful_mask, ip
from ..wire.arp import ArpMessage
from ..wire.ethernet import ETHERTYPE_ARP, ETHERTYPE_IPV4, DecodeError, EthernetFrame
from ..wire.icmp import (
    ICMP_DEST_UNREACH,
    ICMP_ECHO_REQUEST,
    ICMP_TIME_EXCEEDED,
    UNREACH_FRAG_NEEDED,
    UNREACH_HOST,
    UNREACH_NET,
    IcmpMessage,
)
from ..wire.ipv4 import PROTO_ICMP, Ipv4Packet
from .arpcache import ArpCache
from .fragment import Reassembler, fragment
from .interface import MIN_MTU, Interface

log = logging.getLogger(__name__)

DEFAULT_TTL = 64
REASSEMBLY_TIMEOUT = 30 * SECOND
LIMITED_BROADCAST = Ipv4Addr("255.255.255.255")
UNSPECIFIED = Ipv4Addr("0.0.0.0")
ICMP_ERROR_TYPES = (ICMP_DEST_UNREACH, 4, 5, ICMP_TIME_EXCEEDED, 12)


class HostUnreachable(OSError):
    pass


class FragmentationNeeded(OSError):
    def __init__(self, mtu: int):
        super().__init__(f"Message too long, mtu={mtu}")
        self.mtu = mtu


ProtocolHandler = Callable[[Ipv4Packet, Interface | None], None]
IcmpListener = Callable[[IcmpMessage, Ipv4Packet], None]


class Host:
    def __init__(self, sim: Simulator, name: str, *, forwarding: bool = False, index: int = 0):
        self.sim = sim
        self.name = name
        self.index = index
        self.forwarding = forwarding
        self.interfaces: dict[str, Interface] = {}
        self.routes = RoutingTable(notice=self.notice)
        self.arp = ArpCache(self)
        self.reassembler = Reassembler(REASSEMBLY_TIMEOUT)
        self.counters: Counter[str] = Counter()
        self.handlers: dict[int, ProtocolHandler] = {}
        self.icmp_listeners: list[IcmpListener] = []
        self.console: list[tuple[int, str]] = []
        self.default_gateway: Ipv4Addr | None = None
        self._ip_id = itertools.count(1)
        self.icmp_ids = itertools.count(1)
        self.services: dict[str, object] = {}

    def __repr__(self) -> str:
        return f"Host({self.name})"

    # -- console ------------------------------------------------------------

    def print(self, text: str) -> None:
        for line in text.rstrip("\n").split("\n"):
            self.console.append((self.sim.now, line))

    def notice(self, text: str) -> None:
        self.counters["notices"] += 1
        self.print(text)

    def transcript(self) -> str:
        return "".join(f"{line}\n" for _, line in self.console)

    # -- interface configuration --------------------------------------------

    def add_interface(self, name: str, mac: MacAddr | str | None = None, mtu: int = 1500,
                      up: bool = True) -> Interface:
        if name in self.interfaces:
            raise ValueError(f"{self.name} already has interface {name}")
        if mac is None:
            mac = MacAddr(bytes([0x02, 0, 0, self.index & 0xFF, (self.index >> 8) & 0xFF,
                                 len(self.interfaces) + 1]))
        elif isinstance(mac, str):
            mac = MacAddr.parse(mac)
        port = Port(self.name, name, self._frame_input)
        iface = Interface(name, mac, port, mtu=mtu, up=up)
        port.iface = iface
        self.interfaces[name] = iface
        return iface

    def iface(self, name: str) -> Interface:
        try:
            return self.interfaces[name]
        except KeyError:
            raise ValueError(f"{self.name}: no such interface {name}") from None

    def ifconfig_set(self, name: str, addr, mask: SubnetMask | None = None) -> None:
        iface = self.iface(name)
        addr = ip(addr)
        if mask is None:
            mask = classful_mask(addr)
        iface.ip, iface.mask = addr, mask
        iface.method = "manual"
        self._sync_connected(iface)

    def ifconfig_clear(self, name: str) -> None:
        iface = self.iface(name)
        iface.ip = iface.mask = None
        self._sync_connected(iface)

    def ifconfig_set_mac(self, name: str, mac) -> None:
        mac = mac if isinstance(mac, MacAddr) else MacAddr.parse(mac)
        if mac.is_multicast:
            raise AddressError(f"SIOCSIFHWADDR: {mac} has the multicast bit set")
        self.iface(name).mac = mac

    def set_up(self, name: str, flag: bool) -> None:
        iface = self.iface(name)
        iface.up = flag
        if not flag:
            for entry in [e for e in self.routes if e.iface == name and e.origin is not Origin.RIP]:
                self.routes.remove(entry)
        self._sync_connected(iface)

    def set_mtu(self, name: str, mtu: int) -> None:
        if mtu < MIN_MTU:
            raise ValueError(f"SIOCSIFMTU: MTU {mtu} below {MIN_MTU}")
        iface = self.iface(name)
        link = iface.port.link
        if link is not None and mtu > link.mtu:
            raise ValueError(f"SIOCSIFMTU: MTU {mtu} exceeds link MTU {link.mtu}")
        iface.mtu = mtu

    def _sync_connected(self, iface: Interface) -> None:
        """Keep exactly one connected route per up, addressed interface."""
        for entry in [e for e in self.routes if e.iface == iface.name and e.origin is Origin.CONNECTED]:
            self.routes.remove(entry)
        if iface.up and iface.ip is not None:
            self.routes.add(iface.subnet, iface.mask, None, iface.name, origin=Origin.CONNECTED)
            if self.default_gateway is not None and not any(e.is_default for e in self.routes):
                try:
                    self.route_add(UNSPECIFIED, SubnetMask(0), self.default_gateway)
                except RouteError:
                    pass

    # -- routing helpers ------------------------------------------------------

    def route_add(self, destination, mask: SubnetMask, gateway=None, iface: str | None = None,
                  metric: int = 0, origin: Origin = Origin.STATIC):
        return self.routes.add(destination, mask, gateway, iface, metric=metric, origin=origin,
                               interfaces=self.interfaces.values())

    def route_del(self, destination=None, mask: SubnetMask | None = None, gateway=None,
                  iface: str | None = None):
        return self.routes.delete(destination, mask, gateway, iface)

    def set_default_gateway(self, gateway) -> None:
        """Install a default route now if the gateway is on-link, else once it becomes so."""
        self.default_gateway = ip(gateway)
        for entry in [e for e in self.routes if e.is_default and e.origin is Origin.STATIC]:
            self.routes.remove(entry)
        try:
            self.route_add(UNSPECIFIED, SubnetMask(0), self.default_gateway)
        except RouteError:
            pass

    def iface_for_neighbor(self, addr: Ipv4Addr) -> str:
        for iface in self.interfaces.values():
            if iface.on_link(addr):
                return iface.name
        return next(iter(self.interfaces))

    # -- address predicates -----------------------------------------------------

    def local_addresses(self) -> list[Ipv4Addr]:
        return [i.ip for i in self.interfaces.values() if i.up and i.ip is not None]

    def is_local_unicast(self, addr: Ipv4Addr) -> bool:
        return addr in self.local_addresses()

    def is_broadcast(self, addr: Ipv4Addr, iface: Interface | None = None) -> bool:
        if addr == LIMITED_BROADCAST:
            return True
        ifaces = [iface] if iface is not None else self.interfaces.values()
        return any(i.ip is not None and addr == i.broadcast and i.mask.prefixlen < 31 for i in ifaces)

    def source_for(self, dst) -> Ipv4Addr:
        dst = ip(dst)
        if self.is_local_unicast(dst):
            return dst
        entry = self.routes.lookup(dst)
        src = self.interfaces[entry.iface].ip
        if src is None:
            raise NetworkUnreachable(f"connect: Network is unreachable ({dst})")
        return src

    def route_mtu(self, dst) -> int:
        dst = ip(dst)
        if self.is_local_unicast(dst):
            return 65535
        return self.interfaces[self.routes.lookup(dst).iface].mtu

    # -- output ---------------------------------------------------------------

    def next_ip_id(self) -> int:
        return next(self._ip_id) & 0xFFFF

    def ip_send(self, dst, protocol: int, payload: bytes, *, src=None, ttl: int = DEFAULT_TTL,
                df: bool = False, iface: str | None = None) -> Ipv4Packet:
        """Build and emit a locally originated datagram.

        Raises NetworkUnreachable or FragmentationNeeded synchronously; ARP
        failures surface later as silence.
        """
        dst = ip(dst)
        if src is None:
            src = self.interfaces[iface].ip if iface is not None else self.source_for(dst)
        packet = Ipv4Packet(ip(src), dst, protocol, bytes(payload), ttl=ttl,
                            identification=self.next_ip_id(), df=df)
        self.ip_output(packet, iface=iface)
        return packet

    def ip_output(self, packet: Ipv4Packet, *, iface: str | None = None, forwarded: bool = False) -> None:
        dst = packet.dst
        if not forwarded and self.is_local_unicast(dst):
            self.counters["loopback"] += 1
            self.sim.call_soon(self._deliver_local, packet, None)
            return
        if iface is not None:
            out = self.iface(iface)
            next_hop = dst
        else:
            if dst == LIMITED_BROADCAST:
                raise NetworkUnreachable("broadcast needs an explicit interface")
            entry = self.routes.lookup(dst)
            out = self.interfaces[entry.iface]
            next_hop = entry.gateway if entry.gateway is not None else dst
        if not out.up or (out.ip is None and packet.src != UNSPECIFIED):
            raise NetworkUnreachable(f"connect: Network is unreachable ({dst})")
        pieces = [packet]
        if packet.total_length > out.mtu:
            if packet.df:
                raise FragmentationNeeded(out.mtu)
            pieces = fragment(packet, out.mtu)
            self.counters["fragments_created"] += len(pieces)
        self.counters["ip_out"] += len(pieces)
        if dst == LIMITED_BROADCAST or self.is_broadcast(dst, out):
            for piece in pieces:
                self.send_frame(out, BROADCAST_MAC, ETHERTYPE_IPV4, piece.encode(keep_checksum=True))
            return
        for piece in pieces:
            mac = self.arp.resolve(out, next_hop, piece, forwarded)
            if mac is not None:
                self.send_frame(out, mac, ETHERTYPE_IPV4, piece.encode(keep_checksum=True))

    def send_frame(self, iface: Interface, dst: MacAddr, ethertype: int, payload: bytes) -> None:
        if not iface.up:
            self.counters["tx_down_drops"] += 1
            return
        frame = EthernetFrame(dst, iface.mac, ethertype, payload).encode()
        try:
            iface.port.transmit(frame)
        except FrameTooLong:
            self.counters["frame_too_long"] += 1

    def resolution_failed(self, packet: Ipv4Packet, forwarded: bool) -> None:
        self.counters["arp_failures"] += 1
        if forwarded:
            self.icmp_error(packet, ICMP_DEST_UNREACH, UNREACH_HOST)

    # -- input ----------------------------------------------------------------

    def _frame_input(self, port: Port, data: bytes) -> None:
        iface: Interface = port.iface
        if not iface.up:
            return
        try:
            frame = EthernetFrame.decode(data)
        except DecodeError:
            self.counters["malformed"] += 1
            return
        if frame.dst != iface.mac and not frame.dst.is_broadcast:
            self.counters["not_for_me"] += 1
            return
        try:
            if frame.ethertype == ETHERTYPE_ARP:
                self.arp.input(iface, ArpMessage.decode(frame.payload[:28]))
            elif frame.ethertype == ETHERTYPE_IPV4:
                self.ip_input(iface, Ipv4Packet.decode(frame.payload))
        except DecodeError:
            self.counters["malformed"] += 1

    def ip_input(self, iface: Interface, packet: Ipv4Packet) -> None:
        if not packet.checksum_ok:
            self.counters["checksum_drops"] += 1
            return
        self.counters["ip_in"] += 1
        dst = packet.dst
        if self.is_local_unicast(dst) or self.is_broadcast(dst, iface) or (
                iface.ip is None and dst == LIMITED_BROADCAST):
            self._deliver_local(packet, iface)
        elif self.forwarding:
            self.forward(iface, packet)
        else:
            self.counters["forward_disabled_drops"] += 1

    def _deliver_local(self, packet: Ipv4Packet, iface: Interface | None) -> None:
        whole = self.reassembler.add(packet, self.sim.now)
        if whole is None:
            return
        if packet.is_fragment:
            self.counters["reassembled"] += 1
        if whole.protocol == PROTO_ICMP:
            self.icmp_input(whole, iface)
            return
        handler = self.handlers.get(whole.protocol)
        if handler is None:
            self.counters["unknown_protocol"] += 1
            return
        handler(whole, iface)

    def forward(self, ingress: Interface, packet: Ipv4Packet) -> None:
        if packet.ttl <= 1:
            self.counters["ttl_expired"] += 1
            self.icmp_error(packet, ICMP_TIME_EXCEEDED, 0, src=ingress.ip)
            return
        out = packet.with_ttl_decremented()
        try:
            self.ip_output(out, forwarded=True)
        except NetworkUnreachable:
            self.counters["no_route"] += 1
            self.icmp_error(packet, ICMP_DEST_UNREACH, UNREACH_NET, src=ingress.ip)
            return
        except FragmentationNeeded as exc:
            self.counters["frag_needed"] += 1
            self.icmp_error(packet, ICMP_DEST_UNREACH, UNREACH_FRAG_NEEDED, src=ingress.ip, mtu=exc.mtu)
            return
        self.counters["forwarded"] += 1

    # -- ICMP -------------------------------------------------------------------

    def icmp_error(self, offending: Ipv4Packet, type_: int, code: int, *, src=None, mtu: int = 0) -> None:
        """Report ``offending`` back to its source, obeying the usual suppressions."""
        if offending.fragment_offset > 0 or offending.src == UNSPECIFIED:
            return
        if self.is_broadcast(offending.dst) or self.is_broadcast(offending.src):
            return
        if offending.protocol == PROTO_ICMP and offending.payload[:1] and \
                offending.payload[0] in ICMP_ERROR_TYPES:
            return
        msg = IcmpMessage.error(type_, code, offending.encode(keep_checksum=True), mtu)
        try:
            self.ip_send(offending.src, PROTO_ICMP, msg.encode(), src=src)
        except (NetworkUnreachable, FragmentationNeeded):
            self.counters["icmp_error_unsent"] += 1
            return
        self.counters["icmp_errors_sent"] += 1

    def icmp_input(self, packet: Ipv4Packet, iface: Interface | None) -> None:
        try:
            msg = IcmpMessage.decode(packet.payload)
        except DecodeError:
            self.counters["malformed"] += 1
            return
        if not msg.checksum_ok:
            self.counters["checksum_drops"] += 1
            return
        if msg.type == ICMP_ECHO_REQUEST:
            self.counters["echo_requests"] += 1
            if self.is_broadcast(packet.dst):
                return
            reply = msg.echo_reply()
            try:
                self.ip_send(packet.src, PROTO_ICMP, reply.encode(), src=packet.dst)
            except (NetworkUnreachable, FragmentationNeeded):
                self.counters["icmp_error_unsent"] += 1
            return
        for listener in list(self.icmp_listeners):
            listener(msg, packet)

    def echo_request(self, dst, identifier: int, sequence: int, payload: bytes, *,
                     df: bool = False, ttl: int = DEFAULT_TTL) -> Ipv4Packet:
        msg = IcmpMessage.echo(identifier, sequence, payload)
        return self.ip_send(dst, PROTO_ICMP, msg.encode(), df=df, ttl=ttl)

    # -- raw helpers for address-less clients -------------------------------------

    def send_broadcast(self, iface: str, packet: Ipv4Packet) -> None:
        """Emit ``packet`` to the Ethernet broadcast address, bypassing routing."""
        self.send_frame(self.iface(iface), BROADCAST_MAC, ETHERTYPE_IPV4, packet.encode(keep_checksum=True))

    # -- reporting ----------------------------------------------------------------

    def ifconfig_text(self, name: str | None = None) -> str:
        names = [name] if name else sorted(self.interfaces)
        return "\n\n".join(self.iface(n).describe() for n in names) + "\n"
