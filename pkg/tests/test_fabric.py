from __future__ import annotations

import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from netlab.fabric.link import CaptureTap, FrameTooLong, Link, Port
from netlab.fabric.sim import MS, SECOND, US, SchedulingError, Simulator, seconds
from netlab.fabric.switch import Switch
from netlab.network import Network, TopologyError
from netlab.wire import EthernetFrame, MacAddr

MAC = {i: MacAddr(bytes([0, 0x16, 0x76, 0, 0, i])) for i in range(1, 9)}


def frame(src: int, dst: int | None, size: int = 60) -> bytes:
    d = MacAddr(b"\xff" * 6) if dst is None else MAC[dst]
    return EthernetFrame(d, MAC[src], 0x0800, b"\x45" + b"\x00" * (size - 15)).encode()


# -- event loop -------------------------------------------------------------------------

def test_events_run_in_time_then_insertion_order():
    sim = Simulator()
    seen = []
    sim.schedule(5, seen.append, "b")
    sim.schedule(3, seen.append, "a")
    sim.schedule(5, seen.append, "c")
    cancelled = sim.schedule(4, seen.append, "x")
    cancelled.cancel()
    sim.run_until(10)
    assert seen == ["a", "b", "c"] and sim.now == 10


def test_cannot_schedule_in_the_past():
    sim = Simulator()
    sim.run_until(100)
    with pytest.raises(SchedulingError):
        sim.schedule(99, print)


@given(st.lists(st.integers(0, 1000), max_size=40))
def test_clock_is_monotone(times):
    sim = Simulator()
    stamps = []
    for t in times:
        sim.schedule(t, lambda: stamps.append(sim.now))
    sim.run_to_completion()
    assert stamps == sorted(times)


def test_named_rngs_depend_only_on_seed_and_name():
    a, b = Simulator(7), Simulator(7)
    assert a.rng("x").random() == b.rng("x").random()
    assert a.rng("x").random() != a.rng("y").random()
    assert Simulator(8).rng("x").random() != Simulator(7).rng("x").random()


def test_coroutines_sleep_and_wait():
    sim = Simulator()
    log = []

    async def worker():
        await sim.sleep(2 * SECOND)
        log.append(sim.now)
        try:
            await sim.wait_for(sim.future(), 1 * SECOND)
        except TimeoutError:
            log.append(("timeout", sim.now))
        return "done"

    task = sim.spawn(worker())
    sim.run_to_completion()
    assert log == [2 * SECOND, ("timeout", 3 * SECOND)]
    assert task.result() == "done"


def test_time_units():
    assert seconds(1.5) == 1500 * MS == 1_500_000 * US


# -- links ----------------------------------------------------------------------------------

def _wire(sim, **kw):
    got = {"a": [], "b": []}
    a = Port("A", "eth0", lambda p, f: got["a"].append((sim.now, f)))
    b = Port("B", "eth0", lambda p, f: got["b"].append((sim.now, f)))
    return Link(sim, a, b, **kw), a, b, got


@given(st.integers(60, 1514), st.sampled_from([10**6, 10**7, 10**8, 10**9]), st.integers(0, 10**6))
def test_delivery_time_formula(size, rate, delay):
    sim = Simulator()
    link, a, b, got = _wire(sim, rate=rate, delay=delay)
    a.transmit(b"\x00" * size)
    sim.run_to_completion()
    # independent oracle: bits over rate, rounded up to the nanosecond, plus propagation
    assert got["b"][0][0] == math.ceil(size * 8 * 10**9 / rate) + delay


def test_back_to_back_frames_queue_behind_each_other():
    sim = Simulator()
    link, a, b, got = _wire(sim, rate=10**6, delay=0)
    a.transmit(b"\x00" * 125)  # 1 ms on the wire
    a.transmit(b"\x00" * 125)
    b.transmit(b"\x00" * 125)  # the other direction is independent
    sim.run_to_completion()
    assert [t for t, _ in got["b"]] == [1 * MS, 2 * MS]
    assert [t for t, _ in got["a"]] == [1 * MS]


def test_mtu_and_link_state():
    sim = Simulator()
    link, a, b, got = _wire(sim, mtu=576)
    a.transmit(b"\x00" * 590)
    with pytest.raises(FrameTooLong):
        a.transmit(b"\x00" * 591)
    sim.run_to_completion()
    link.up = False
    a.transmit(b"\x00" * 60)
    b.transmit(b"\x00" * 60)
    sim.run_to_completion()
    assert len(got["b"]) == 1 and got["a"] == [] and link.dropped == 2


def test_frames_in_flight_die_with_the_link():
    sim = Simulator()
    link, a, b, got = _wire(sim)
    a.transmit(b"\x00" * 60)
    link.up = False
    sim.run_to_completion()
    assert got["b"] == [] and link.dropped == 1


def test_drop_is_seeded():
    def survivors(seed):
        sim = Simulator(seed)
        link, a, b, got = _wire(sim, drop=0.3)
        for _ in range(200):
            a.transmit(b"\x00" * 60)
        sim.run_to_completion()
        return len(got["b"])

    assert survivors(1) == survivors(1)
    assert 100 < survivors(1) < 180


def test_taps_record_both_directions():
    sim = Simulator()
    link, a, b, got = _wire(sim)
    tap = CaptureTap("A.eth0")
    a.taps.append(tap)
    a.transmit(b"\x01" * 60)
    b.transmit(b"\x02" * 60)
    sim.run_to_completion()
    assert [r.data[0] for r in tap.capture.records] == [1, 2]


# -- switch ---------------------------------------------------------------------------------

def _switched(n=3):
    sim = Simulator()
    sw = Switch(sim, "SW")
    got = {i: [] for i in range(1, n + 1)}
    ends = {}
    for i in range(1, n + 1):
        end = Port(f"H{i}", "eth0", lambda p, f, i=i: got[i].append(f))
        Link(sim, sw.add_port(i), end)
        ends[i] = end
    return sim, sw, ends, got


def test_switch_floods_unknown_then_learns():
    sim, sw, ends, got = _switched()
    ends[1].transmit(frame(1, 2))
    sim.run_to_completion()
    assert len(got[2]) == 1 and len(got[3]) == 1 and sw.flooded == 1
    ends[2].transmit(frame(2, 1))
    sim.run_to_completion()
    assert len(got[1]) == 1 and len(got[3]) == 1 and sw.forwarded == 1
    assert sw.lookup(MAC[1]) == 1 and sw.lookup(MAC[2]) == 2


def test_switch_broadcast_flood_order_is_ascending_ports():
    sim, sw, ends, got = _switched(4)
    order = []
    for i in (2, 3, 4):
        ends[i].on_receive = lambda p, f, i=i: order.append(i)
    ends[1].transmit(frame(1, None))
    sim.run_to_completion()
    assert order == [2, 3, 4]


def test_switch_filters_same_port_and_ages_out():
    sim, sw, ends, got = _switched()
    ends[1].transmit(frame(1, None))
    ends[2].transmit(frame(2, None))
    sim.run_to_completion()
    sw.switch_forward(1, frame(2, 1))  # destination lives on the ingress port
    assert sw.filtered == 1
    sim.run_until(sim.now + 301 * SECOND)
    assert sw.lookup(MAC[1]) is None
    assert sw.table_lines() == ["MAC Address        Port  Age(s)"]


# -- network builder ----------------------------------------------------------------------------

def test_network_endpoint_errors():
    net = Network()
    net.add_host("PC1")
    net.add_switch("SW")
    with pytest.raises(TopologyError):
        net.add_host("PC1")
    with pytest.raises(TopologyError):
        net.port("PC9.eth0")
    with pytest.raises(TopologyError):
        net.port("SW.uplink")
    with pytest.raises(TopologyError):
        net.port("PC1")
    net.connect("PC1.eth0", "SW.1", mtu=1000)
    assert net.host("PC1").interfaces["eth0"].mtu == 1000
    with pytest.raises(TopologyError):
        net.connect("PC1.eth0", "SW.2")
    with pytest.raises(TopologyError):
        net.host("SW")
    assert net.link("SW.1") is net.link("PC1.eth0-SW.1")
    with pytest.raises(TopologyError):
        net.capture("PC1.eth9")


def test_cisco_interfaces_start_shut_down():
    net = Network()
    net.add_host("R", "cisco")
    net.port("R.Vlan1")
    assert net.host("R").interfaces["Vlan1"].up is False
    assert net.host("R").forwarding
