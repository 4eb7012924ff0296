from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scapy.layers.inet import IP, TCP
from scapy.layers.l2 import ARP, Ether

from conftest import frames, pair, run_for
from netlab.fabric.sim import MS, SECOND
from netlab.netapps.iperf import IperfServer, iperf_tcp_client
from netlab.netapps.ping import ping
from netlab.scenario import stats
from netlab.wire import EthernetFrame, Ipv4Packet, MacAddr, ip
from netlab.wire.pcap import PcapCapture, PcapRecord


@pytest.fixture(scope="module")
def transfer():
    net = pair(seed=5)
    IperfServer(net.host("PC2"))
    net.run_task(ping(net.host("PC1"), "10.0.1.2", count=2, quiet=True), limit=5 * SECOND)
    net.run_task(iperf_tcp_client(net.host("PC1"), "10.0.1.2", n_bytes=7000), limit=20 * SECOND)
    run_for(net, 2)
    return frames(net, "PC1.eth0"), net.taps["PC1.eth0"].capture


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5000).map(lambda ms: ms * MS), st.sampled_from(["", "tcp", "icmp", "arp", "tcp.len > 0"]))
def test_io_graph_conserves_packets_and_bytes(transfer, interval, expr):
    fs, _ = transfer
    bins = stats.io_graph(fs, expr, interval)
    chosen = stats.select(fs, expr)
    assert sum(b.packets for b in bins) == len(chosen)
    assert sum(b.bytes for b in bins) == sum(f.d.length for f in chosen)
    assert [b.start_ns for b in bins] == [i * interval for i in range(len(bins))]


def test_io_graph_csv_and_errors(transfer):
    fs, _ = transfer
    text = stats.io_graph_csv(stats.io_graph(fs, "", SECOND))
    assert text.splitlines()[0] == "start_s,packets,bytes"
    assert text.splitlines()[1].startswith("0.000000,")
    assert stats.io_graph([], "", SECOND) == []
    with pytest.raises(ValueError):
        stats.io_graph(fs, "", 0)


def scapy_ledger(capture: PcapCapture, only_tcp: bool):
    """Independent byte ledger computed from scapy's view of each frame."""
    led = dict.fromkeys(("ethernet", "arp", "ip", "transport", "payload", "padding"), 0)
    for rec in capture.records:
        p = Ether(rec.data)
        if only_tcp and TCP not in p:
            continue
        led["ethernet"] += 14
        if ARP in p:
            led["arp"] += 28
            led["padding"] += len(rec.data) - 14 - 28
            continue
        ihl = p[IP].ihl * 4
        led["ip"] += ihl
        l4 = p[IP].len - ihl
        hdr = p[TCP].dataofs * 4 if TCP in p else 8
        led["transport"] += hdr
        led["payload"] += l4 - hdr
        led["padding"] += len(rec.data) - 14 - p[IP].len
    return led


@pytest.mark.parametrize("expr", ["", "tcp"])
def test_overhead_matches_scapy_ledger(transfer, expr):
    fs, cap = transfer
    led = stats.overhead(fs, expr)
    assert led["discrepancy"] == 0
    want = scapy_ledger(cap, expr == "tcp")
    # ICMP headers count as transport (8 bytes), the same convention as UDP
    assert {k: led[k] for k in want} == want
    assert stats.format_overhead(led).splitlines()[-1].split() == ["discrepancy", "0"]


def test_tcp_phases_of_a_clean_transfer(transfer):
    fs, _ = transfer
    phases = stats.tcp_phases(fs, 5001)
    assert phases["handshake"] == 3 and phases["teardown"] == 4
    assert phases["data"] == 5  # 7000 bytes in 1460-byte segments
    assert stats.tcp_phases(fs, 9999) == {"handshake": 0, "data": 0, "teardown": 0, "other": 0}


def test_loop_detector():
    a, b = MacAddr.parse("00:16:76:00:00:01"), MacAddr.parse("00:16:76:00:00:02")
    pkt = Ipv4Packet(ip("10.0.1.1"), ip("10.0.9.9"), 17, bytes(8), identification=42)
    cap = PcapCapture()
    cap.append(PcapRecord.at_ns(0, EthernetFrame(b, a, 0x0800, pkt.encode()).encode()))
    # a router sending it back out of the same wire is fine
    cap.append(PcapRecord.at_ns(1000, EthernetFrame(a, b, 0x0800, pkt.with_ttl_decremented().encode()).encode()))
    assert stats.loop_violations(stats.load(cap)) == []
    cap.append(PcapRecord.at_ns(2000, EthernetFrame(b, a, 0x0800, pkt.encode()).encode()))
    assert len(stats.loop_violations(stats.load(cap))) == 1


def test_time_cut(transfer):
    fs, _ = transfer
    mid = fs[len(fs) // 2].time_ns
    assert stats.count(fs, "", until_ns=mid) == sum(f.time_ns <= mid for f in fs)


def test_seq_ranges_absolute_and_relative(transfer):
    (r,) = stats.tcp_seq_ranges(transfer[0])
    assert r.relative() == (1, 7000)
    assert r.first == (r.isn + 1) & 0xFFFFFFFF
