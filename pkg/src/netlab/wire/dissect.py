"""Layer-by-layer decoding of captured Ethernet frames."""

from __future__ import annotations

from dataclasses import dataclass

from .addr import MacAddr
from .arp import ArpMessage
from .ethernet import ETH_HEADER_LEN, ETHERTYPE_ARP, ETHERTYPE_IPV4, DecodeError
from .icmp import IcmpMessage
from .ipv4 import IPV4_HEADER_LEN, PROTO_ICMP, PROTO_TCP, PROTO_UDP, Ipv4Packet
from .tcp import TcpSegment
from .udp import UdpDatagram

DHCP_PORTS = (67, 68)
RIP_PORT = 520


@dataclass
class Dissection:
    length: int
    eth_src: MacAddr | None = None
    eth_dst: MacAddr | None = None
    ethertype: int | None = None
    arp: ArpMessage | None = None
    ip: Ipv4Packet | None = None
    icmp: IcmpMessage | None = None
    udp: UdpDatagram | None = None
    tcp: TcpSegment | None = None
    error: str | None = None

    @property
    def is_dhcp(self) -> bool:
        return self.udp is not None and (self.udp.src_port in DHCP_PORTS or self.udp.dst_port in DHCP_PORTS)

    @property
    def is_rip(self) -> bool:
        return self.udp is not None and RIP_PORT in (self.udp.src_port, self.udp.dst_port)

    def header_bytes(self) -> dict[str, int]:
        """Split the frame length into header/payload/padding byte counts."""
        parts = {"ethernet": ETH_HEADER_LEN, "arp": 0, "ip": 0, "transport": 0, "payload": 0, "padding": 0}
        if self.eth_src is None:
            parts = dict.fromkeys(parts, 0)
            parts["payload"] = self.length
            return parts
        used = ETH_HEADER_LEN
        if self.arp is not None:
            parts["arp"] = 28
            used += 28
        elif self.ip is not None:
            parts["ip"] = IPV4_HEADER_LEN
            used += self.ip.total_length
            if self.tcp is not None:
                parts["transport"] = self.tcp.header_len
                parts["payload"] = len(self.tcp.payload)
            elif self.udp is not None:
                parts["transport"] = 8
                parts["payload"] = len(self.udp.payload)
            elif self.icmp is not None:
                parts["transport"] = 8
                parts["payload"] = len(self.icmp.data)
            else:
                parts["payload"] = len(self.ip.payload)
        parts["padding"] = self.length - used
        return parts


def dissect(frame: bytes) -> Dissection:
    d = Dissection(length=len(frame))
    if len(frame) >= ETH_HEADER_LEN:
        d.eth_dst = MacAddr(bytes(frame[0:6]))
        d.eth_src = MacAddr(bytes(frame[6:12]))
        d.ethertype = int.from_bytes(frame[12:14], "big")
    try:
        if d.ethertype == ETHERTYPE_ARP:
            d.arp = ArpMessage.decode(frame[ETH_HEADER_LEN:])
        elif d.ethertype == ETHERTYPE_IPV4:
            d.ip = Ipv4Packet.decode(frame[ETH_HEADER_LEN:])
            _dissect_transport(d, d.ip)
        elif d.ethertype is None:
            raise DecodeError("runt frame")
        else:
            raise DecodeError(f"unknown ethertype 0x{d.ethertype:04x}")
    except DecodeError as exc:
        d.error = str(exc)
    return d


def _dissect_transport(d: Dissection, pkt: Ipv4Packet) -> None:
    if pkt.fragment_offset:
        return  # only the first fragment carries the transport header
    if pkt.mf:
        # partial datagram: parse headers only
        if pkt.protocol == PROTO_ICMP and len(pkt.payload) >= 8:
            d.icmp = IcmpMessage.decode(pkt.payload)
        return
    if pkt.protocol == PROTO_ICMP:
        d.icmp = IcmpMessage.decode(pkt.payload)
    elif pkt.protocol == PROTO_UDP:
        d.udp = UdpDatagram.decode(pkt.payload, pkt.src, pkt.dst)
    elif pkt.protocol == PROTO_TCP:
        d.tcp = TcpSegment.decode(pkt.payload, pkt.src, pkt.dst)
