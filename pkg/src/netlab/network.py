"""Topology builder: nodes, switches, cables and capture taps on one clock."""

from __future__ import annotations

from . import transport
from .fabric.link import DEFAULT_DELAY, DEFAULT_MTU, DEFAULT_RATE, CaptureTap, Link, Port
from .fabric.sim import Simulator
from .fabric.switch import Switch
from .hoststack.host import Host

NODE_KINDS = ("host", "router", "cisco")


class TopologyError(ValueError):
    pass


class Network:
    def __init__(self, seed: int = 0):
        self.sim = Simulator(seed)
        self.nodes: dict[str, Host | Switch] = {}
        self.kinds: dict[str, str] = {}
        self.links: dict[str, Link] = {}
        self.taps: dict[str, CaptureTap] = {}

    # -- construction ---------------------------------------------------------------

    def add_host(self, name: str, kind: str = "host") -> Host:
        if kind not in NODE_KINDS:
            raise TopologyError(f"unknown node kind {kind!r}")
        self._check_new(name)
        host = Host(self.sim, name, forwarding=kind != "host", index=len(self.nodes) + 1)
        transport.install(host)
        self.nodes[name] = host
        self.kinds[name] = kind
        return host

    def add_switch(self, name: str) -> Switch:
        self._check_new(name)
        sw = Switch(self.sim, name)
        self.nodes[name] = sw
        self.kinds[name] = "switch"
        return sw

    def _check_new(self, name: str) -> None:
        if name in self.nodes:
            raise TopologyError(f"node {name} declared twice")

    def host(self, name: str) -> Host:
        node = self.nodes.get(name)
        if not isinstance(node, Host):
            raise TopologyError(f"{name} is not a declared host or router")
        return node

    def hosts(self) -> list[Host]:
        return [n for n in self.nodes.values() if isinstance(n, Host)]

    def port(self, label: str, create: bool = True) -> Port:
        """Resolve ``NODE.IF`` (``SW.3`` for switch ports), creating interfaces on demand."""
        name, sep, ifname = label.partition(".")
        if not sep or not ifname:
            raise TopologyError(f"endpoint {label!r} must look like NODE.IF")
        node = self.nodes.get(name)
        if node is None:
            raise TopologyError(f"undeclared node {name}")
        if isinstance(node, Switch):
            if not ifname.isdigit():
                raise TopologyError(f"switch port {label!r} must be numeric")
            if int(ifname) not in node.ports and not create:
                raise TopologyError(f"no such port {label}")
            return node.add_port(int(ifname))
        if ifname not in node.interfaces:
            if not create:
                raise TopologyError(f"no such interface {label}")
            up = self.kinds[name] != "cisco"
            node.add_interface(ifname, up=up)
        return node.interfaces[ifname].port

    def connect(self, a: str, b: str, *, mtu: int = DEFAULT_MTU, rate: int = DEFAULT_RATE,
                delay: int = DEFAULT_DELAY, drop: float = 0.0) -> Link:
        pa, pb = self.port(a), self.port(b)
        if pa.link is not None or pb.link is not None:
            raise TopologyError(f"{a if pa.link else b} is already cabled")
        link = Link(self.sim, pa, pb, mtu=mtu, rate=rate, delay=delay, drop=drop)
        for port in (pa, pb):
            iface = getattr(port, "iface", None)
            if iface is not None:
                iface.mtu = mtu
        self.links[f"{a}-{b}"] = link
        return link

    def link(self, name: str) -> Link:
        """Find a cable by ``A.if-B.if`` or by either endpoint label."""
        if name in self.links:
            return self.links[name]
        for key, link in self.links.items():
            if name in (link.a.label, link.b.label):
                return link
        raise TopologyError(f"no such link {name}")

    def capture(self, label: str) -> CaptureTap:
        if label in self.taps:
            return self.taps[label]
        port = self.port(label, create=False)
        tap = CaptureTap(label)
        port.taps.append(tap)
        self.taps[label] = tap
        return tap

    def capture_all_hosts(self) -> None:
        for host in self.hosts():
            for iface in host.interfaces.values():
                if iface.port.link is not None:
                    self.capture(iface.port.label)

    # -- running ----------------------------------------------------------------------

    def run(self, until: int) -> None:
        self.sim.run_until(until)

    def run_task(self, coro, limit: int | None = None):
        """Spawn ``coro`` and advance the clock until it finishes; returns its result."""
        task = self.sim.spawn(coro)
        while not task.done():
            nxt = self.sim.next_time()
            if nxt is None or (limit is not None and nxt > limit):
                break
            self.sim.step()
        return task.result()
