"""Application-layer tools run as cooperative tasks on a host."""

from .dhcp import DhcpMessage, DhcpPool, DhcpResult, DhcpServer, dhcp_client
from .echo import ANSWER, QUESTION, EchoLog, EchoMode, EchoServer, echo_client
from .iperf import IperfReport, IperfServer, iperf_tcp_client, iperf_udp_client, udp_datagram_count
from .ping import PingReport, Probe, ping
from .trace import Hop, MtuReport, TracerouteReport, mtu_discover, traceroute

__all__ = [
    "DhcpMessage", "DhcpPool", "DhcpResult", "DhcpServer", "dhcp_client", "ANSWER", "QUESTION",
    "EchoLog", "EchoMode", "EchoServer", "echo_client", "IperfReport", "IperfServer",
    "iperf_tcp_client", "iperf_udp_client", "udp_datagram_count", "PingReport", "Probe", "ping",
    "Hop", "MtuReport", "TracerouteReport", "mtu_discover", "traceroute",
]
