"""Small topology builders shared by the tests."""

from __future__ import annotations

import pytest

from netlab.fabric.sim import SECOND
from netlab.network import Network
from netlab.wire.addr import SubnetMask

M24 = SubnetMask(24)


def pair(seed: int = 0, **link) -> Network:
    """PC1 10.0.1.1/24 cabled straight to PC2 10.0.1.2/24, both tapped."""
    net = Network(seed)
    a, b = net.add_host("PC1"), net.add_host("PC2")
    a.add_interface("eth0")
    b.add_interface("eth0")
    net.connect("PC1.eth0", "PC2.eth0", **link)
    a.ifconfig_set("eth0", "10.0.1.1", M24)
    b.ifconfig_set("eth0", "10.0.1.2", M24)
    net.capture("PC1.eth0")
    net.capture("PC2.eth0")
    return net


def chain(seed: int = 0, forwarding: bool = True, **link) -> Network:
    """PC1 - PC2 - PC3 - PC4 over 10.0.1/24, 10.0.2/24 and 10.0.3/24.

    PC2 and PC3 are plain hosts with forwarding switched on, as a lab
    bench would have them.
    """
    net = Network(seed)
    hosts = [net.add_host(n) for n in ("PC1", "PC2", "PC3", "PC4")]
    for h in hosts:
        h.add_interface("eth0")
    hosts[1].add_interface("eth1")
    hosts[2].add_interface("eth1")
    net.connect("PC1.eth0", "PC2.eth0", **link)
    net.connect("PC2.eth1", "PC3.eth0", **link)
    net.connect("PC3.eth1", "PC4.eth0", **link)
    pc1, pc2, pc3, pc4 = hosts
    pc1.ifconfig_set("eth0", "10.0.1.1", M24)
    pc2.ifconfig_set("eth0", "10.0.1.2", M24)
    pc2.ifconfig_set("eth1", "10.0.2.2", M24)
    pc3.ifconfig_set("eth0", "10.0.2.3", M24)
    pc3.ifconfig_set("eth1", "10.0.3.3", M24)
    pc4.ifconfig_set("eth0", "10.0.3.4", M24)
    pc2.forwarding = pc3.forwarding = forwarding
    pc1.set_default_gateway("10.0.1.2")
    pc4.set_default_gateway("10.0.3.3")
    pc2.route_add("10.0.3.0", M24, "10.0.2.3")
    pc3.route_add("10.0.1.0", M24, "10.0.2.2")
    for label in ("PC1.eth0", "PC4.eth0"):
        net.capture(label)
    return net


@pytest.fixture
def net_pair() -> Network:
    return pair()


@pytest.fixture
def net_chain() -> Network:
    return chain()


def run_for(net: Network, seconds: float) -> None:
    net.run(net.sim.now + int(seconds * SECOND))


def frames(net: Network, label: str):
    """Dissected frames seen so far by the tap on ``label``."""
    from netlab.scenario import stats

    return stats.load(net.taps[label].capture)


def count(net: Network, label: str, expr: str = "") -> int:
    from netlab.scenario import stats

    return stats.count(frames(net, label), expr)
