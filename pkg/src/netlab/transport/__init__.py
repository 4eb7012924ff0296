"""UDP and TCP endpoints with a socket-style API."""

from .ports import EPHEMERAL_LOW, AddressInUse, PortAllocator
from .tcp import ConnectionRefused, TcpConnection, TcpListener, TcpSocket, TcpStack, TcpState
from .udp import Datagram, IcmpReport, UdpSocket, UdpStack, quoted_header


def install(host):
    """Attach UDP and TCP to ``host`` sharing one ephemeral port counter."""
    ports = PortAllocator()
    host.udp = UdpStack(host, ports)
    host.tcp = TcpStack(host, ports)
    return host


__all__ = [
    "EPHEMERAL_LOW", "AddressInUse", "PortAllocator", "ConnectionRefused", "TcpConnection",
    "TcpListener", "TcpSocket", "TcpStack", "TcpState", "Datagram", "IcmpReport", "UdpSocket",
    "UdpStack", "quoted_header", "install",
]
