from __future__ import annotations

import pytest

from conftest import M24, chain, count, pair, run_for
from netlab.fabric.sim import SECOND
from netlab.netapps import dhcp
from netlab.netapps.dhcp import DhcpMessage, DhcpServer, dhcp_client
from netlab.netapps.echo import ANSWER, QUESTION, EchoMode, EchoServer, echo_client
from netlab.netapps.iperf import IperfServer, iperf_tcp_client, iperf_udp_client, udp_datagram_count
from netlab.netapps.ping import ping
from netlab.netapps.trace import mtu_discover, traceroute
from netlab.network import Network
from netlab.wire import MacAddr, ip


def test_ping_counts_rtt_and_summary():
    net = pair()
    pc1 = net.host("PC1")
    rep = net.run_task(ping(pc1, "10.0.1.2", count=3), limit=10 * SECOND)
    assert (rep.sent, rep.received, rep.loss_pct) == (3, 3, 0.0)
    # oracle: two 98-byte frames each way at 1 Gbit/s plus 100 us propagation
    one_way = -(-98 * 8 * SECOND // 10**9) + 100_000
    assert rep.rtt_min == 2 * one_way
    assert rep.rtt_max > rep.rtt_min  # the first one waited for ARP
    text = pc1.transcript()
    assert "3 packets transmitted, 3 received, 0% packet loss" in text
    assert "64 bytes from 10.0.1.2: icmp_seq=1 ttl=64" in text


def test_ping_timeouts_and_errors():
    net = chain()
    rep = net.run_task(ping(net.host("PC1"), "10.0.1.77", count=2, quiet=True), limit=20 * SECOND)
    assert rep.received == 0 and rep.loss_pct == 100.0 and not rep.success
    rep = net.run_task(ping(net.host("PC1"), "172.16.0.1", count=1, quiet=True), limit=20 * SECOND)
    assert rep.probes[0].error is not None and rep.received == 0


def test_traceroute_over_the_chain():
    net = chain()
    rep = net.run_task(traceroute(net.host("PC1"), "10.0.3.4"), limit=60 * SECOND)
    assert rep.reached and rep.probes_sent == 9
    assert [str(a) for a in rep.path] == ["10.0.1.2", "10.0.2.3", "10.0.3.4"]


def test_traceroute_stars_when_a_hop_is_silent():
    net = chain()
    net.host("PC3").icmp_error = lambda *a, **k: None
    rep = net.run_task(traceroute(net.host("PC1"), "10.0.3.4", max_ttl=3), limit=60 * SECOND)
    assert rep.path[1] is None and rep.reached
    assert "*" in net.host("PC1").transcript()


def test_mtu_discovery_binary_search():
    net = chain()
    net.host("PC3").set_mtu("eth1", 1006)
    net.link("PC3.eth1").mtu = 1006
    rep = net.run_task(mtu_discover(net.host("PC1"), "10.0.3.4"), limit=120 * SECOND)
    assert rep.mtu == 1006
    assert len(rep.probes) <= 20


def test_iperf_udp_counts():
    net = pair()
    srv = IperfServer(net.host("PC2"), udp=True)
    rep = net.run_task(iperf_udp_client(net.host("PC1"), "10.0.1.2", duration=2 * SECOND), limit=10 * SECOND)
    run_for(net, 1)
    expect = udp_datagram_count(2 * SECOND, 1_000_000)
    assert expect == 170 and rep.count == expect
    assert srv.reports[-1].count == expect and srv.reports[-1].bytes == expect * 1470
    assert count(net, "PC1.eth0", "udp.dstport == 5001") == expect


def test_iperf_tcp_bytes():
    net = pair()
    srv = IperfServer(net.host("PC2"))
    rep = net.run_task(iperf_tcp_client(net.host("PC1"), "10.0.1.2", n_bytes=50_000, report_mss=True),
                       limit=20 * SECOND)
    run_for(net, 1)
    assert rep.bytes == 50_000 and srv.reports[-1].bytes == 50_000
    assert rep.mss == 1460 and rep.throughput > 0


def test_iperf_tcp_refused():
    net = pair()
    rep = net.run_task(iperf_tcp_client(net.host("PC1"), "10.0.1.2", n_bytes=10), limit=5 * SECOND)
    assert rep.error is not None and rep.bytes == 0


def dhcp_net():
    net = Network()
    r = net.add_host("R", "router")
    r.add_interface("eth0")
    pc = net.add_host("PC")
    pc.add_interface("eth0")
    net.connect("R.eth0", "PC.eth0")
    r.ifconfig_set("eth0", "192.168.1.1", M24)
    net.capture("PC.eth0")
    srv = DhcpServer(r)
    pool = srv.pool("lan")
    pool.network, pool.mask, pool.default_router = ip("192.168.1.0"), M24, ip("192.168.1.1")
    return net, srv


def test_dhcp_binds_and_skips_exclusions():
    net, srv = dhcp_net()
    srv.exclude("192.168.1.2", "192.168.1.9")
    res = net.run_task(dhcp_client(net.host("PC"), "eth0"), limit=20 * SECOND)
    assert res.bound and str(res.address) == "192.168.1.10" and str(res.router) == "192.168.1.1"
    assert res.messages == ["DHCPDISCOVER", "DHCPOFFER", "DHCPREQUEST", "DHCPACK"]
    assert count(net, "PC.eth0", "udp.port == 67") == 4
    pc = net.host("PC")
    assert str(pc.interfaces["eth0"].ip) == "192.168.1.10"
    assert str(pc.routes.lookup("8.8.8.8").gateway) == "192.168.1.1"
    assert srv.active_leases() == [(ip("192.168.1.10"), pc.interfaces["eth0"].mac)]


def test_dhcp_without_server_gives_up():
    net, srv = dhcp_net()
    srv.enabled = False
    res = net.run_task(dhcp_client(net.host("PC"), "eth0", attempts=2), limit=30 * SECOND)
    assert not res.bound
    assert count(net, "PC.eth0", "udp.dstport == 67") == 2


def test_dhcp_message_round_trip():
    msg = DhcpMessage(2, 0x1234, MacAddr.parse("00:16:76:00:00:01"), dhcp.OFFER,
                      yiaddr=ip("192.168.1.10"), subnet_mask=M24, router=ip("192.168.1.1"),
                      lease_time=3600, server_id=ip("192.168.1.1"))
    data = msg.encode()
    assert len(data) >= dhcp.MIN_LEN and data[236:240] == dhcp.MAGIC
    back = DhcpMessage.decode(data)
    assert back == msg and back.type_name == "DHCPOFFER"


@pytest.mark.parametrize("udp", [False, True])
def test_echo_oneshot(udp):
    net = pair()
    srv = EchoServer(net.host("PC2"), udp=udp)
    log = net.run_task(echo_client(net.host("PC1"), "10.0.1.2", udp=udp), limit=10 * SECOND)
    assert log.sent == [QUESTION] and log.received == [ANSWER]
    assert srv.log.received == [QUESTION]
    assert count(net, "PC1.eth0", "tcp" if not udp else "udp") >= 2


def test_echo_continuous():
    net = pair()
    EchoServer(net.host("PC2"), mode=EchoMode.CONTINUOUS)
    log = net.run_task(echo_client(net.host("PC1"), "10.0.1.2", mode=EchoMode.CONTINUOUS,
                                   lines=["hello", "again"]), limit=10 * SECOND)
    assert log.sent == ["hello", "again", "bye"]
    assert log.received == ["hello", "again"]
