"""Bit-exact encoders and decoders for the protocols the simulator speaks."""

from .addr import (
    BROADCAST_MAC,
    ZERO_MAC,
    AddressError,
    Ipv4Addr,
    MacAddr,
    SubnetMask,
    broadcast_of,
    classful_mask,
    ip,
    parse_cidr,
    same_subnet,
    subnet_of,
    subnet_plan,
)
from .arp import ARP_REPLY, ARP_REQUEST, ArpMessage
from .checksum import checksum16, incremental_update, ones_sum, verifies
from .dissect import Dissection, dissect
from .ethernet import (
    ETHERTYPE_ARP,
    ETHERTYPE_IPV4,
    DecodeError,
    EthernetFrame,
    decode_frame,
    encode_frame,
)
from .icmp import IcmpMessage
from .ipv4 import PROTO_ICMP, PROTO_TCP, PROTO_UDP, Ipv4Packet
from .pcap import PcapCapture, PcapError, PcapRecord, pcap_read, pcap_write
from .tcp import TcpFlags, TcpSegment
from .udp import UdpDatagram

__all__ = [name for name in dir() if not name.startswith("_")]
