from __future__ import annotations

import pytest

from conftest import count, frames, pair, run_for
from netlab.fabric.sim import SECOND
from netlab.transport.tcp import MAX_RETRIES, TIME_WAIT, ConnectionRefused, TcpState

PORT = 7000


def serve_and_collect(net, *, read=True, port=PORT):
    """Accept one connection on PC2 and gather everything it receives."""
    srv = net.host("PC2").tcp.socket()
    srv.bind(port=port)
    srv.listen()
    got = bytearray()
    box = {}

    async def server():
        conn = await srv.accept()
        box["conn"] = conn.conn
        if not read:
            await net.sim.sleep(20 * SECOND)
        while chunk := await conn.recv():
            got.extend(chunk)
        conn.close()

    net.sim.spawn(server())
    return got, box


# -- UDP ----------------------------------------------------------------------------------

def test_udp_round_trip_and_metadata():
    net = pair()
    a, b = net.host("PC1").udp.socket(), net.host("PC2").udp.socket()
    b.bind(port=9)
    a.sendto(b"ping", "10.0.1.2", 9)
    d = net.run_task(b.recvfrom(), limit=SECOND)
    assert (d.payload, str(d.src), d.dst_port, d.iface, d.ttl) == (b"ping", "10.0.1.1", 9, "eth0", 64)
    assert a.local_port >= 1024
    b.sendto(b"pong", d.src, d.src_port)
    assert net.run_task(a.recvfrom(), limit=2 * SECOND).payload == b"pong"


def test_udp_closed_port_reports_unreachable():
    net = pair()
    a = net.host("PC1").udp.socket()
    a.sendto(b"x", "10.0.1.2", 9)
    report = net.run_task(a.errors.get(), limit=SECOND)
    assert (report.type, report.code, report.dst_port, str(report.reporter)) == (3, 3, 9, "10.0.1.2")
    assert count(net, "PC1.eth0", "icmp.type == 3 and icmp.code == 3") == 1


def test_udp_port_in_use():
    net = pair()
    s = net.host("PC1").udp.socket()
    s.bind(port=53)
    with pytest.raises(OSError):
        net.host("PC1").udp.socket().bind(port=53)


# -- TCP ----------------------------------------------------------------------------------

def test_handshake_transfer_teardown_and_time_wait():
    net = pair()
    got, box = serve_and_collect(net)
    cli = net.host("PC1").tcp.socket()
    data = bytes(range(256)) * 40

    async def client():
        await cli.connect("10.0.1.2", PORT)
        await cli.sendall(data)
        cli.close()

    net.run_task(client(), limit=5 * SECOND)
    run_for(net, 5)
    assert bytes(got) == data
    fs = frames(net, "PC1.eth0")
    syn = [f for f in fs if f.d.tcp is not None and f.d.tcp.flags & 0x02]
    assert len(syn) == 2  # SYN and SYN/ACK
    assert count(net, "PC1.eth0", "tcp.flags.fin == 1") == 2
    conn = cli.conn
    assert conn.state is TcpState.TIME_WAIT
    assert conn.mss == 1460 and conn.stats["window_violations"] == 0
    assert [s for _, s in box["conn"].history][-1] == "CLOSED"
    run_for(net, TIME_WAIT / SECOND)
    assert conn.state is TcpState.CLOSED
    assert conn in net.host("PC1").tcp.closed_connections
    assert not net.host("PC1").tcp.connections


def test_connection_refused_by_reset():
    net = pair()
    cli = net.host("PC1").tcp.socket()
    with pytest.raises(ConnectionRefused):
        net.run_task(cli.connect("10.0.1.2", 1), limit=SECOND)
    assert count(net, "PC1.eth0", "tcp.flags.reset == 1") == 1
    assert net.host("PC2").tcp.resets_sent == 1


def test_abort_resets_peer():
    net = pair()
    srv = net.host("PC2").tcp.socket()
    srv.bind(port=PORT)
    srv.listen()
    cli = net.host("PC1").tcp.socket()
    outcome = {}

    async def server():
        conn = await srv.accept()
        try:
            await conn.recv()
        except ConnectionResetError:
            outcome["reset"] = True

    async def client():
        await cli.connect("10.0.1.2", PORT)
        cli.conn.abort()

    net.sim.spawn(server())
    net.run_task(client(), limit=SECOND)
    run_for(net, 1)
    assert outcome == {"reset": True}


def test_retransmission_backs_off_then_gives_up():
    net = pair()
    serve_and_collect(net)
    cli = net.host("PC1").tcp.socket()
    net.run_task(cli.connect("10.0.1.2", PORT), limit=SECOND)
    start = net.sim.now
    net.link("PC1.eth0").up = False
    cli.send(b"lost" * 10)
    run_for(net, 120)
    conn = cli.conn
    # pcap stamps are whole microseconds, so compare in milliseconds
    sent = [round((f.time_ns - start) / 10**6) for f in frames(net, "PC1.eth0") if f.d.tcp and f.d.tcp.payload]
    # first transmission then one resend per timeout, 1 s doubling each time
    assert sent == [0, 1000, 3000, 7000, 15000, 31000][: MAX_RETRIES + 1]
    assert conn.stats["retransmissions"] == MAX_RETRIES and conn.stats["timeouts"] == 1
    assert conn.state is TcpState.CLOSED and isinstance(conn.error, TimeoutError)


def test_recovers_from_a_short_outage():
    net = pair()
    got, _ = serve_and_collect(net)
    cli = net.host("PC1").tcp.socket()
    data = b"abcdefgh" * 2000

    async def client():
        await cli.connect("10.0.1.2", PORT)
        cli.send(data)
        net.link("PC1.eth0").up = False
        await net.sim.sleep(3 * SECOND)
        net.link("PC1.eth0").up = True
        await cli.conn.drained()
        cli.close()

    net.run_task(client(), limit=60 * SECOND)
    run_for(net, 5)
    assert bytes(got) == data and cli.conn.stats["retransmissions"] >= 2


def test_zero_window_is_probed_until_reader_drains():
    net = pair()
    got, box = serve_and_collect(net, read=False)
    cli = net.host("PC1").tcp.socket()
    data = bytes(100_000)

    async def client():
        await cli.connect("10.0.1.2", PORT)
        await cli.sendall(data)
        cli.close()

    net.sim.spawn(client())
    run_for(net, 15)
    assert box["conn"].rcv_wnd == 0
    assert cli.conn.snd_wnd == 0 and cli.conn.stats["window_probes"] >= 2
    run_for(net, 30)
    assert bytes(got) == data
    assert cli.conn.stats["window_violations"] == 0
    assert count(net, "PC1.eth0", "tcp.window_size == 0") >= 1
