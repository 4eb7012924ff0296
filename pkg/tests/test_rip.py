from __future__ import annotations

import random

import networkx as nx
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from conftest import M24, run_for
from netlab.network import Network
from netlab.rip import INFINITY, RipEntry, RipMessage, RipProcess, SplitHorizon, rip_enable
from netlab.wire import Ipv4Addr, SubnetMask, ip
from netlab.wire.ethernet import DecodeError

entries = st.builds(
    RipEntry,
    st.integers(0, 2**32 - 1).map(Ipv4Addr),
    st.integers(0, 32).map(SubnetMask),
    st.integers(1, INFINITY),
    st.integers(0, 2**32 - 1).map(Ipv4Addr),
    st.integers(0, 0xFFFF),
)


@given(st.sampled_from([1, 2]), st.lists(entries, max_size=25))
def test_codec_round_trip(command, es):
    msg = RipMessage(command, tuple(es))
    data = msg.encode()
    assert len(data) == 4 + 20 * len(es)
    assert RipMessage.decode(data) == msg


def test_codec_rejects_bad_input():
    e = RipEntry(ip("10.0.0.0"), SubnetMask(8), 1)
    with pytest.raises(ValueError):
        RipMessage(2, (e,) * 26).encode()
    with pytest.raises(ValueError):
        RipMessage(2, (RipEntry(ip("10.0.0.0"), SubnetMask(8), 17),)).encode()
    good = RipMessage(2, (e,)).encode()
    with pytest.raises(DecodeError):
        RipMessage.decode(good[:-1])
    with pytest.raises(DecodeError):
        RipMessage.decode(good[:-4] + (0).to_bytes(4, "big"))
    with pytest.raises(DecodeError):
        RipMessage.decode(b"\x07\x02\x00\x00")


def build(graph: nx.Graph, seed: int = 0, **options) -> tuple[Network, dict[tuple, str]]:
    """One router per node, one /24 per edge, one stub /24 per router."""
    net = Network(seed)
    routers = {n: net.add_host(f"R{n}", "router") for n in graph.nodes}
    subnets = {}
    for n, r in routers.items():
        r.add_interface("stub")
        r.ifconfig_set("stub", f"10.100.{n}.1", M24)
        subnets[("stub", n)] = f"10.100.{n}.0"
    for k, (u, v) in enumerate(sorted(graph.edges)):
        a, b = routers[u], routers[v]
        ia, ib = f"e{k}", f"e{k}"
        a.add_interface(ia)
        b.add_interface(ib)
        net.connect(f"R{u}.{ia}", f"R{v}.{ib}")
        a.ifconfig_set(ia, f"10.{k + 1}.0.1", M24)
        b.ifconfig_set(ib, f"10.{k + 1}.0.2", M24)
        subnets[(u, v)] = f"10.{k + 1}.0.0"
    for r in routers.values():
        rip_enable(r, ["10.0.0.0"], **options)
    return net, subnets


def random_graph(rng: random.Random, n: int, extra: int) -> nx.Graph:
    g = nx.random_labeled_tree(n, seed=rng.randrange(2**31)) if n > 1 else nx.empty_graph(1)
    nodes = list(g.nodes)
    for _ in range(extra):
        u, v = rng.sample(nodes, 2) if n > 1 else (0, 0)
        if u != v:
            g.add_edge(u, v)
    return g


@settings(max_examples=12, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.integers(0, 2**31), st.integers(1, 6), st.integers(0, 2))
def test_converges_to_shortest_hop_counts(seed, n, extra):
    g = random_graph(random.Random(seed), n, extra)
    net, subnets = build(g)
    run_for(net, 40)
    hops = dict(nx.all_pairs_shortest_path_length(g))
    for node in g.nodes:
        proc: RipProcess = net.host(f"R{node}").services["rip"]
        for where, prefix in subnets.items():
            # oracle: one more than the hop distance to the nearest attached router
            attached = [where[1]] if where[0] == "stub" else list(where)
            expect = 1 + min(hops[node][a] for a in attached)
            assert proc.metric_to(prefix, M24) == expect, (node, where)


def line(n=3, **options):
    return build(nx.path_graph(n), **options)


def test_route_times_out_then_is_garbage_collected():
    net, subnets = line()
    run_for(net, 10)
    a = net.host("R0").services["rip"]
    assert a.metric_to("10.100.2.0", M24) == 3
    net.host("R2").services["rip"].stop()
    run_for(net, 150)
    assert a.metric_to("10.100.2.0", M24) == 3
    run_for(net, 60)  # past the 180 s timeout at the middle router
    assert a.metric_to("10.100.2.0", M24) == INFINITY
    assert all(str(e.destination) != "10.100.2.0" for e in net.host("R0").routes.entries)
    run_for(net, 130)
    assert a.metric_to("10.100.2.0", M24) is None


def test_split_horizon_plain_and_poisoned():
    net, _ = line(2)
    run_for(net, 5)
    r0 = net.host("R0").services["rip"]
    iface = net.host("R0").interfaces["e0"]
    plain = {str(e.destination) for e in r0._advertisement(iface)}
    assert "10.100.1.0" not in plain and "10.100.0.0" in plain
    r0.split_horizon = SplitHorizon.POISONED
    poisoned = {str(e.destination): e.metric for e in r0._advertisement(iface)}
    assert poisoned["10.100.1.0"] == INFINITY


def test_metrics_stay_in_bounds_on_long_chains():
    net, _ = build(nx.path_graph(17))
    run_for(net, 60)
    first = net.host("R0").services["rip"]
    assert first.metric_to("10.100.14.0", M24) == 15
    assert first.metric_to("10.100.15.0", M24) is None  # 16 hops is unreachable
    assert all(1 <= r.metric <= INFINITY for r in first.table())


def test_network_statement_rules():
    net = Network()
    r = net.add_host("R", "router")
    r.add_interface("a")
    r.add_interface("b")
    r.ifconfig_set("a", "128.235.1.1", M24)
    r.ifconfig_set("b", "192.168.5.1", M24)
    proc = rip_enable(r)
    assert proc.add_network("128.235.0.0")  # classful network covers its subnets
    assert proc.add_network("192.168.5.0")
    assert not proc.add_network("10.0.0.0")
    assert "10.0.0.0" in proc.show_protocols()
    assert proc.warnings == ["% RIP: network 10.0.0.0 does not match any interface"]
    assert [i.name for i in proc.interfaces()] == ["a", "b"]
    plain = net.add_host("H")
    with pytest.raises(ValueError):
        RipProcess(plain)

