from __future__ import annotations

import random
from types import SimpleNamespace

import pytest
from hypothesis import given
from hypothesis import strategies as st

from netlab.routing import NetworkUnreachable, Origin, RouteError, RoutingTable
from netlab.wire import SubnetMask, ip

ETH0 = SimpleNamespace(name="eth0", ip=ip("10.0.1.2"), mask=SubnetMask(24), up=True)


def brute_force(entries, dst):
    """Oracle: among matching entries take max by (prefix, -metric, -seq)."""
    d = int(ip(dst))
    matching = [e for e in entries if d >> (32 - e[1]) << (32 - e[1]) == int(ip(e[0])) or e[1] == 0]
    if not matching:
        return None
    return max(matching, key=lambda e: (e[1], -e[2], -e[3]))


def test_multiple_matches_pick_longest_prefix():
    t = RoutingTable()
    t.add("10.0.1.0", SubnetMask(24), iface="eth0", origin=Origin.CONNECTED)
    t.add("10.0.0.0", SubnetMask(16), "10.0.1.71", interfaces=[ETH0])
    t.add("10.0.3.9", SubnetMask(32), "10.0.1.81", interfaces=[ETH0])
    t.add("10.0.3.0", SubnetMask(24), "10.0.1.61", interfaces=[ETH0])
    assert t.next_hop("10.0.3.9") == ("eth0", ip("10.0.1.81"))
    assert t.next_hop("10.0.3.5") == ("eth0", ip("10.0.1.61"))
    assert t.next_hop("10.0.200.1") == ("eth0", ip("10.0.1.71"))
    assert t.next_hop("10.0.1.7") == ("eth0", ip("10.0.1.7"))
    with pytest.raises(NetworkUnreachable):
        t.lookup("192.168.0.1")
    assert t.lookup("10.0.3.9").flags == "UGH"


def test_ties_go_to_metric_then_age():
    t = RoutingTable()
    first = t.add("0.0.0.0", SubnetMask(0), iface="eth0", metric=5)
    second = t.add("0.0.0.0", SubnetMask(0), iface="eth1", metric=1)
    third = t.add("0.0.0.0", SubnetMask(0), iface="eth2", metric=1)
    assert t.lookup("1.2.3.4") is second
    t.remove(second)
    assert t.lookup("1.2.3.4") is third
    t.remove(third)
    assert t.lookup("1.2.3.4") is first


def test_add_validation():
    notes = []
    t = RoutingTable(notice=notes.append)
    e = t.add("10.0.3.77", SubnetMask(24), iface="eth0")
    assert str(e.destination) == "10.0.3.0" and "outside mask" in notes[0]
    with pytest.raises(RouteError):
        t.add("10.0.3.0", SubnetMask(24), iface="eth0")
    with pytest.raises(RouteError):
        t.add("10.9.0.0", SubnetMask(16), "10.5.5.5", interfaces=[ETH0])
    with pytest.raises(RouteError):
        t.add("10.9.0.0", SubnetMask(16))


def test_delete_first_match_and_missing():
    notes = []
    t = RoutingTable(notice=notes.append)
    t.add("10.0.0.0", SubnetMask(16), "10.0.1.71", interfaces=[ETH0])
    t.add("10.0.0.0", SubnetMask(16), "10.0.1.72", interfaces=[ETH0])
    gone = t.delete("10.0.0.0", SubnetMask(16))
    assert str(gone.gateway) == "10.0.1.71" and len(t) == 1
    assert t.delete("10.7.0.0") is None and notes == ["SIOCDELRT: No such process"]


def test_render_orders_by_prefix_then_age():
    t = RoutingTable()
    t.add("0.0.0.0", SubnetMask(0), "10.0.1.1", interfaces=[ETH0])
    t.add("10.0.1.0", SubnetMask(24), iface="eth0")
    lines = t.render().splitlines()
    assert lines[0].split() == ["Destination", "Gateway", "Genmask", "Flags", "Metric", "Iface"]
    assert lines[1].split() == ["10.0.1.0", "0.0.0.0", "255.255.255.0", "U", "0", "eth0"]
    assert lines[2].split() == ["0.0.0.0", "10.0.1.1", "0.0.0.0", "UG", "0", "eth0"]


def random_table(rng: random.Random, size: int):
    t = RoutingTable()
    rows = []
    for i in range(size):
        plen = rng.choice([0, 8, 16, 20, 24, 24, 28, 32])
        base = rng.choice([0x0A000000, 0x0A000100, 0x0A000300, 0xC0A80000]) | rng.getrandbits(12)
        dest = base >> (32 - plen) << (32 - plen) if plen else 0
        metric = rng.randrange(3)
        try:
            e = t.add(ip(dest), SubnetMask(plen), iface=f"eth{i % 3}", metric=metric)
        except RouteError:
            continue
        rows.append((str(e.destination), plen, metric, e.seq, e))
    return t, rows


@given(st.integers(0, 2**32 - 1), st.integers(0, 64), st.integers(0, 2**32 - 1))
def test_lookup_equals_brute_force(seed, size, dst):
    t, rows = random_table(random.Random(seed), size)
    expect = brute_force(rows, ip(dst))
    if expect is None:
        with pytest.raises(NetworkUnreachable):
            t.lookup(ip(dst))
    else:
        assert t.lookup(ip(dst)) is expect[4]
