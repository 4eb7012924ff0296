"""Codec tests. Scapy is the independent oracle for the on-wire layouts."""

from __future__ import annotations

import io
import struct

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scapy.layers.inet import ICMP, IP, TCP, UDP
from scapy.layers.l2 import ARP, Ether

from netlab.wire import (
    ARP_REPLY,
    ARP_REQUEST,
    ArpMessage,
    DecodeError,
    EthernetFrame,
    IcmpMessage,
    Ipv4Packet,
    MacAddr,
    PcapCapture,
    PcapError,
    PcapRecord,
    SubnetMask,
    TcpFlags,
    TcpSegment,
    UdpDatagram,
    checksum16,
    classful_mask,
    dissect,
    incremental_update,
    ip,
    parse_cidr,
    pcap_read,
    pcap_write,
    same_subnet,
    subnet_plan,
    verifies,
)
from netlab.wire.addr import AddressError, broadcast_of, subnet_of

A, B = ip("10.0.1.1"), ip("10.0.1.2")

macs = st.binary(min_size=6, max_size=6).map(MacAddr)
addrs = st.integers(0, 2**32 - 1).map(ip)
ports = st.integers(0, 65535)


# -- addresses ---------------------------------------------------------------------------

def test_mac_parse_and_format():
    mac = MacAddr.parse("00-16-76-AA-0b-1")
    assert str(mac) == "00:16:76:aa:0b:01"
    assert not mac.is_multicast
    assert MacAddr.parse("ff:ff:ff:ff:ff:ff").is_broadcast
    with pytest.raises(AddressError):
        MacAddr.parse("00:16:76:aa:0b")


def test_mask_parsing():
    assert SubnetMask.parse("255.255.240.0").prefixlen == 20
    assert SubnetMask.parse("/24") == SubnetMask(24)
    assert str(SubnetMask(20)) == "255.255.240.0"
    with pytest.raises(AddressError):
        SubnetMask.parse("255.0.255.0")
    with pytest.raises(AddressError):
        SubnetMask(33)


def test_cidr_and_subnet_helpers():
    addr, mask = parse_cidr("10.0.1.3/20")
    assert subnet_of(addr, mask) == ip("10.0.0.0")
    assert broadcast_of(addr, mask) == ip("10.0.15.255")
    assert classful_mask("128.235.1.1") == SubnetMask(16)
    assert classful_mask("200.1.1.1") == SubnetMask(24)
    assert classful_mask("10.1.1.1") == SubnetMask(8)
    assert subnet_plan("128.235.0.0", SubnetMask(16), SubnetMask(24)) == (256, 254)
    with pytest.raises(AddressError):
        parse_cidr("10.0.0.1")


@given(addrs, addrs, addrs, st.integers(0, 32))
def test_same_subnet_is_an_equivalence(a, b, c, plen):
    mask = SubnetMask(plen)
    assert same_subnet(a, a, mask)
    assert same_subnet(a, b, mask) == same_subnet(b, a, mask)
    if same_subnet(a, b, mask) and same_subnet(b, c, mask):
        assert same_subnet(a, c, mask)


@given(st.integers(0, 32))
def test_mask_text_round_trip(plen):
    mask = SubnetMask(plen)
    assert SubnetMask.parse(str(mask)) == mask


# -- checksum ----------------------------------------------------------------------------

def test_checksum_known_vector():
    # worked example: the classic 20-byte header with its checksum zeroed
    header = bytes.fromhex("450000730000400040110000c0a80001c0a800c7")
    assert checksum16(header) == 0xB861
    patched = header[:10] + struct.pack("!H", 0xB861) + header[12:]
    assert verifies(patched)


@given(st.binary(min_size=20, max_size=20), st.integers(0, 9), st.integers(0, 0xFFFF))
def test_incremental_update_matches_recompute(header, word_index, new_word):
    words = list(struct.unpack("!10H", header))
    # a real header always has its version nibble set; an all-zero block is
    # the one input where the update yields the other zero, 0x0000
    words[0] |= 0x4000
    words[5] = 0
    old = checksum16(struct.pack("!10H", *words))
    if word_index == 5:
        return
    if word_index == 0:
        new_word |= 0x4000
    old_word = words[word_index]
    words[word_index] = new_word
    fresh = checksum16(struct.pack("!10H", *words))
    # both are valid representations; compare by verification
    words[5] = incremental_update(old, old_word, new_word)
    assert verifies(struct.pack("!10H", *words))
    words[5] = fresh
    assert verifies(struct.pack("!10H", *words))


# -- ethernet / arp ------------------------------------------------------------------------

@given(macs, macs, st.sampled_from([0x0800, 0x0806]), st.binary(max_size=1500))
def test_ethernet_round_trip(dst, src, etype, payload):
    frame = EthernetFrame(dst, src, etype, payload)
    raw = frame.encode()
    assert len(raw) >= 60
    back = EthernetFrame.decode(raw)
    assert (back.dst, back.src, back.ethertype) == (dst, src, etype)
    assert back.payload[:len(payload)] == payload


def test_ethernet_matches_scapy():
    frame = EthernetFrame(MacAddr.parse("ff:ff:ff:ff:ff:ff"), MacAddr.parse("00:16:76:00:00:01"), 0x0806, b"x")
    ours = frame.encode()
    theirs = bytes(Ether(dst="ff:ff:ff:ff:ff:ff", src="00:16:76:00:00:01", type=0x0806) / (b"x" + b"\x00" * 45))
    assert ours == theirs


def test_ethernet_rejects_runts_and_unknown_types():
    with pytest.raises(DecodeError):
        EthernetFrame.decode(b"\x00" * 10)
    with pytest.raises(DecodeError):
        EthernetFrame.decode(b"\x00" * 12 + b"\x86\xdd" + b"\x00" * 46)


@given(st.sampled_from([ARP_REQUEST, ARP_REPLY]), macs, addrs, macs, addrs)
def test_arp_against_scapy(oper, sha, spa, tha, tpa):
    raw = ArpMessage(oper, sha, spa, tha, tpa).encode()
    ref = bytes(ARP(op=oper, hwsrc=str(sha), psrc=str(spa), hwdst=str(tha), pdst=str(tpa)))
    assert raw == ref
    assert ArpMessage.decode(raw) == ArpMessage(oper, sha, spa, tha, tpa)


def test_arp_rejects_other_operations():
    with pytest.raises(ValueError):
        ArpMessage(3, MacAddr(b"\0" * 6), A, MacAddr(b"\0" * 6), B).encode()
    raw = bytearray(ArpMessage(1, MacAddr(b"\0" * 6), A, MacAddr(b"\0" * 6), B).encode())
    raw[7] = 9
    with pytest.raises(DecodeError):
        ArpMessage.decode(bytes(raw))


# -- ipv4 ---------------------------------------------------------------------------------

ipv4_packets = st.builds(
    Ipv4Packet, addrs, addrs, st.integers(0, 255), st.binary(max_size=600),
    ttl=st.integers(0, 255), identification=st.integers(0, 0xFFFF), df=st.booleans(),
    mf=st.booleans(), fragment_offset=st.integers(0, 0x1FFF), tos=st.integers(0, 255),
)


@given(ipv4_packets)
def test_ipv4_round_trip_and_checksum(pkt):
    raw = pkt.encode()
    assert verifies(raw[:20])
    back = Ipv4Packet.decode(raw)
    assert back == pkt and back.checksum_ok


@given(ipv4_packets)
@settings(max_examples=60)
def test_ipv4_header_matches_scapy(pkt):
    flags = (2 if pkt.df else 0) | (1 if pkt.mf else 0)
    ref = bytes(IP(src=str(pkt.src), dst=str(pkt.dst), proto=pkt.protocol, ttl=pkt.ttl, id=pkt.identification,
                   flags=flags, frag=pkt.fragment_offset, tos=pkt.tos) / pkt.payload)
    assert pkt.encode() == ref


@given(ipv4_packets.filter(lambda p: p.ttl > 0))
def test_ttl_decrement_keeps_checksum_valid(pkt):
    hop = Ipv4Packet.decode(pkt.encode()).with_ttl_decremented()
    raw = hop.encode(keep_checksum=True)
    assert verifies(raw[:20])
    assert Ipv4Packet.decode(raw).ttl == pkt.ttl - 1


def test_ipv4_decode_errors():
    good = Ipv4Packet(A, B, 1, b"abc").encode()
    with pytest.raises(DecodeError):
        Ipv4Packet.decode(good[:19])
    with pytest.raises(DecodeError):
        Ipv4Packet.decode(b"\x65" + good[1:])
    with pytest.raises(DecodeError):
        Ipv4Packet.decode(b"\x46" + good[1:])
    corrupt = bytearray(good)
    corrupt[8] ^= 1
    assert not Ipv4Packet.decode(bytes(corrupt)).checksum_ok


# -- icmp / udp / tcp -----------------------------------------------------------------------

@given(st.integers(0, 0xFFFF), st.integers(0, 0xFFFF), st.binary(max_size=200), st.booleans())
def test_icmp_echo_against_scapy(ident, seq, data, reply):
    msg = IcmpMessage.echo(ident, seq, data, reply=reply)
    raw = msg.encode()
    assert raw == bytes(ICMP(type=0 if reply else 8, id=ident, seq=seq) / data)
    back = IcmpMessage.decode(raw)
    assert back == msg and back.checksum_ok
    assert (back.identifier, back.sequence) == (ident, seq)


def test_icmp_error_quotes_header_and_eight_bytes():
    offending = Ipv4Packet(A, B, 17, b"12345678abcdef").encode()
    msg = IcmpMessage.error(3, 4, offending, next_hop_mtu=576)
    assert msg.data == offending[:28] and msg.next_hop_mtu == 576 and msg.is_error
    assert verifies(msg.encode())


@given(ports, ports, st.binary(max_size=1000), addrs, addrs)
def test_udp_against_scapy(sport, dport, data, src, dst):
    raw = UdpDatagram(sport, dport, data).encode(src, dst)
    ref = bytes(IP(src=str(src), dst=str(dst)) / UDP(sport=sport, dport=dport) / data)[20:]
    assert raw == ref
    back = UdpDatagram.decode(raw, src, dst)
    assert back == UdpDatagram(sport, dport, data) and back.checksum_ok


def test_udp_length_checks():
    raw = UdpDatagram(1, 2, b"abcd").encode(A, B)
    with pytest.raises(DecodeError):
        UdpDatagram.decode(raw[:6], A, B)
    with pytest.raises(DecodeError):
        UdpDatagram.decode(raw[:10], A, B)
    assert not UdpDatagram.decode(raw, A, ip("10.0.1.3")).checksum_ok


tcp_segments = st.builds(
    TcpSegment, ports, ports, st.integers(0, 2**32 - 1), st.integers(0, 2**32 - 1),
    st.integers(0, 0x3F).map(TcpFlags), st.integers(0, 0xFFFF), st.binary(max_size=600),
    mss=st.none() | st.integers(0, 0xFFFF), urgent_ptr=st.integers(0, 0xFFFF),
)


@given(tcp_segments, addrs, addrs)
def test_tcp_round_trip(seg, src, dst):
    raw = seg.encode(src, dst)
    assert len(raw) == seg.header_len + len(seg.payload)
    back = TcpSegment.decode(raw, src, dst)
    assert back == seg and back.checksum_ok


@given(tcp_segments, addrs, addrs)
@settings(max_examples=60)
def test_tcp_against_scapy(seg, src, dst):
    opts = [("MSS", seg.mss)] if seg.mss is not None else []
    ref = bytes(IP(src=str(src), dst=str(dst)) / TCP(
        sport=seg.src_port, dport=seg.dst_port, seq=seg.seq, ack=seg.ack, flags=int(seg.flags),
        window=seg.window, urgptr=seg.urgent_ptr, options=opts) / seg.payload)[20:]
    assert seg.encode(src, dst) == ref


def test_tcp_seg_len_counts_syn_and_fin():
    assert TcpSegment(1, 2, 0, 0, TcpFlags.SYN, 0).seg_len == 1
    assert TcpSegment(1, 2, 0, 0, TcpFlags.FIN | TcpFlags.ACK, 0, b"ab").seg_len == 3
    assert TcpFlags(TcpFlags.SYN | TcpFlags.ACK).short() == "SYN,ACK"


def test_tcp_malformed_option():
    raw = bytearray(TcpSegment(1, 2, 0, 0, TcpFlags.SYN, 0, mss=1460).encode(A, B))
    raw[21] = 0
    with pytest.raises(DecodeError):
        TcpSegment.decode(bytes(raw), A, B)


# -- pcap -------------------------------------------------------------------------------------

records = st.lists(
    st.tuples(st.integers(0, 10**6), st.binary(min_size=1, max_size=300)), max_size=20,
).map(lambda xs: sorted(xs, key=lambda x: x[0]))


@given(records)
def test_pcap_round_trip(items):
    cap = PcapCapture()
    for us, data in items:
        cap.append(PcapRecord(us // 10**6, us % 10**6, data))
    buf = io.BytesIO()
    pcap_write(cap, buf)
    buf.seek(0)
    back = pcap_read(buf)
    assert back.records == cap.records
    assert back.to_bytes() == cap.to_bytes()


def test_pcap_readable_by_scapy(tmp_path):
    from scapy.utils import rdpcap

    frame = EthernetFrame(MacAddr.parse("00:16:76:00:00:02"), MacAddr.parse("00:16:76:00:00:01"), 0x0800,
                          Ipv4Packet(A, B, 1, IcmpMessage.echo(1, 1, b"hi").encode()).encode()).encode()
    cap = PcapCapture([PcapRecord.at_ns(1_500_000_000, frame)])
    path = tmp_path / "one.pcap"
    path.write_bytes(cap.to_bytes())
    pkts = rdpcap(str(path))
    assert len(pkts) == 1 and bytes(pkts[0]) == frame
    assert pkts[0][ICMP].type == 8 and float(pkts[0].time) == pytest.approx(1.5)


def test_pcap_errors():
    with pytest.raises(PcapError):
        PcapCapture.from_bytes(b"\x00" * 24)
    cap = PcapCapture([PcapRecord(0, 0, b"abc")])
    with pytest.raises(PcapError):
        PcapCapture.from_bytes(cap.to_bytes()[:-1])
    late = PcapCapture([PcapRecord(5, 0, b"x")])
    with pytest.raises(PcapError):
        late.append(PcapRecord(4, 999_999, b"y"))


def test_pcap_big_endian_files_are_read():
    cap = PcapCapture([PcapRecord(1, 2, b"abcd")])
    little = cap.to_bytes()
    g = struct.unpack("<IHHiIII", little[:24])
    r = struct.unpack("<IIII", little[24:40])
    big = struct.pack(">IHHiIII", *g) + struct.pack(">IIII", *r) + b"abcd"
    assert PcapCapture.from_bytes(big).records == cap.records


# -- dissection ---------------------------------------------------------------------------------

def test_dissect_layers_and_byte_ledger():
    seg = TcpSegment(49152, 5001, 1, 1, TcpFlags.ACK | TcpFlags.PSH, 65535, b"x" * 100)
    pkt = Ipv4Packet(A, B, 6, seg.encode(A, B))
    frame = EthernetFrame(MacAddr(b"\x02" * 6), MacAddr(b"\x04" * 6), 0x0800, pkt.encode()).encode()
    d = dissect(frame)
    assert d.tcp is not None and d.tcp.payload == b"x" * 100 and d.error is None
    parts = d.header_bytes()
    assert parts == {"ethernet": 14, "arp": 0, "ip": 20, "transport": 20, "payload": 100, "padding": 0}
    assert sum(parts.values()) == len(frame)


def test_dissect_padded_arp_and_garbage():
    msg = ArpMessage(1, MacAddr(b"\x02" * 6), A, MacAddr(b"\0" * 6), B)
    frame = EthernetFrame(MacAddr(b"\xff" * 6), MacAddr(b"\x02" * 6), 0x0806, msg.encode()).encode()
    d = dissect(frame)
    assert d.arp == msg and d.header_bytes()["padding"] == 18
    assert dissect(b"\x00" * 5).error
    assert dissect(b"\x00" * 12 + b"\x88\xcc" + b"\x00" * 46).error
