"""Distance-vector routing process (RIPv2-shaped messages on UDP 520)."""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass

from .fabric.sim import SECOND, Event
from .hoststack.host import Host
from .hoststack.interface import Interface
from .routing import Origin, RouteEntry
from .wire.addr import Ipv4Addr, SubnetMask, classful_mask, ip
from .wire.ethernet import DecodeError

RIP_PORT = 520
INFINITY = 16
MAX_ENTRIES = 25
COMMAND_REQUEST, COMMAND_RESPONSE = 1, 2
VERSION = 2
AF_INET = 2


class SplitHorizon(enum.Enum):
    PLAIN = "plain"
    POISONED = "poisoned"


@dataclass(frozen=True)
class RipEntry:
    destination: Ipv4Addr
    mask: SubnetMask
    metric: int
    next_hop: Ipv4Addr = Ipv4Addr("0.0.0.0")
    tag: int = 0


@dataclass(frozen=True)
class RipMessage:
    command: int
    entries: tuple[RipEntry, ...] = ()
    version: int = VERSION

    def encode(self) -> bytes:
        if len(self.entries) > MAX_ENTRIES:
            raise ValueError(f"{len(self.entries)} entries exceed {MAX_ENTRIES} per message")
        out = bytearray(struct.pack("!BBH", self.command, self.version, 0))
        for e in self.entries:
            if not 1 <= e.metric <= INFINITY:
                raise ValueError(f"metric {e.metric} outside 1..{INFINITY}")
            out += struct.pack("!HH4s4s4sI", AF_INET, e.tag, e.destination.packed,
                               e.mask.address.packed, e.next_hop.packed, e.metric)
        return bytes(out)

    @classmethod
    def decode(cls, data: bytes) -> RipMessage:
        if len(data) < 4 or (len(data) - 4) % 20:
            raise DecodeError(f"RIP message has bad length {len(data)}")
        command, version, _ = struct.unpack_from("!BBH", data)
        if command not in (COMMAND_REQUEST, COMMAND_RESPONSE):
            raise DecodeError(f"unknown RIP command {command}")
        entries = []
        for off in range(4, len(data), 20):
            afi, tag, dst, mask, nh, metric = struct.unpack_from("!HH4s4s4sI", data, off)
            if afi != AF_INET:
                continue
            if not 1 <= metric <= INFINITY:
                raise DecodeError(f"RIP metric {metric} outside 1..{INFINITY}")
            entries.append(RipEntry(Ipv4Addr(dst), SubnetMask.from_int(int.from_bytes(mask, "big")),
                                    metric, Ipv4Addr(nh), tag))
        if len(entries) > MAX_ENTRIES:
            raise DecodeError("too many RIP entries")
        return cls(command, tuple(entries), version)


@dataclass
class RipRoute:
    destination: Ipv4Addr
    mask: SubnetMask
    metric: int
    next_hop: Ipv4Addr
    iface: str
    updated: int
    garbage_since: int | None = None
    entry: RouteEntry | None = None

    @property
    def key(self) -> tuple[Ipv4Addr, SubnetMask]:
        return (self.destination, self.mask)


class RipProcess:
    def __init__(self, host: Host, *, update_interval: int = 30 * SECOND, route_timeout: int = 180 * SECOND,
                 garbage_timeout: int = 120 * SECOND, split_horizon: SplitHorizon = SplitHorizon.PLAIN):
        if not host.forwarding:
            raise ValueError(f"{host.name}: RIP needs IP forwarding enabled")
        self.host = host
        self.sim = host.sim
        self.update_interval = update_interval
        self.route_timeout = route_timeout
        self.garbage_timeout = garbage_timeout
        self.split_horizon = split_horizon
        self.networks: list[Ipv4Addr] = []
        self.routes: dict[tuple[Ipv4Addr, SubnetMask], RipRoute] = {}
        self.sources: dict[Ipv4Addr, int] = {}
        self.warnings: list[str] = []
        self.malformed = 0
        self.updates_sent = 0
        self.triggered_sent = 0
        self._last_sent: dict[str, int] = {}
        self._pending_trigger: dict[str, Event] = {}
        self._next_periodic: int | None = None
        self.sock = host.udp.socket()
        self.sock.bind(port=RIP_PORT)
        self.sock.on_datagram = self._on_datagram
        self._periodic = self.sim.call_later(1 * SECOND, self._periodic_update)
        self._next_periodic = self.sim.now + 1 * SECOND
        self._sweeper = self.sim.call_later(1 * SECOND, self._sweep)

    # -- configuration --------------------------------------------------------------

    @staticmethod
    def covers(network: Ipv4Addr, iface: Interface) -> bool:
        """Classful network numbers cover their whole class; anything else names one subnet."""
        if iface.ip is None:
            return False
        cmask = classful_mask(network)
        if int(network) & ~cmask.value & 0xFFFFFFFF == 0:
            return int(iface.ip) & cmask.value == int(network)
        return iface.subnet == network

    def add_network(self, network) -> bool:
        network = ip(network)
        if network in self.networks:
            return True
        # kept either way: an interface configured later can still match it
        self.networks.append(network)
        if not any(self.covers(network, i) for i in self.host.interfaces.values()):
            msg = f"% RIP: network {network} does not match any interface"
            self.warnings.append(msg)
            self.host.notice(msg)
            return False
        return True

    def remove_network(self, network) -> None:
        network = ip(network)
        if network in self.networks:
            self.networks.remove(network)

    def interfaces(self) -> list[Interface]:
        return [i for i in self.host.interfaces.values()
                if i.up and i.ip is not None and any(self.covers(n, i) for n in self.networks)]

    def connected(self) -> list[RipRoute]:
        return [RipRoute(i.subnet, i.mask, 1, Ipv4Addr("0.0.0.0"), i.name, self.sim.now)
                for i in self.interfaces()]

    def stop(self) -> None:
        self._periodic.cancel()
        self._sweeper.cancel()
        for ev in self._pending_trigger.values():
            ev.cancel()
        for route in self.routes.values():
            self._uninstall(route)
        self.routes.clear()
        self.sock.close()

    # -- sending ----------------------------------------------------------------------

    def _advertisement(self, iface: Interface) -> list[RipEntry]:
        entries = []
        local = {(r.destination, r.mask) for r in self.connected()}
        for r in self.connected():
            entries.append(RipEntry(r.destination, r.mask, 1))
        for key in sorted(self.routes, key=lambda k: (int(k[0]), k[1].prefixlen)):
            r = self.routes[key]
            if key in local:
                continue
            metric = r.metric
            if r.iface == iface.name:
                if self.split_horizon is SplitHorizon.PLAIN:
                    continue
                metric = INFINITY
            entries.append(RipEntry(r.destination, r.mask, metric))
        return entries

    def send_update(self, iface: Interface) -> None:
        entries = self._advertisement(iface)
        self._last_sent[iface.name] = self.sim.now
        for start in range(0, max(len(entries), 1), MAX_ENTRIES):
            chunk = entries[start:start + MAX_ENTRIES]
            if not chunk:
                return
            msg = RipMessage(COMMAND_RESPONSE, tuple(chunk))
            self.sock.sendto(msg.encode(), iface.broadcast, RIP_PORT, ttl=1, iface=iface.name)
            self.updates_sent += 1

    def _periodic_update(self) -> None:
        for iface in self.interfaces():
            pending = self._pending_trigger.pop(iface.name, None)
            if pending is not None:
                pending.cancel()
            self.send_update(iface)
        self._next_periodic = self.sim.now + self.update_interval
        self._periodic = self.sim.call_later(self.update_interval, self._periodic_update)

    def _trigger_all(self) -> None:
        for iface in self.interfaces():
            self._trigger(iface.name)

    def _trigger(self, name: str) -> None:
        if name in self._pending_trigger:
            return
        last = self._last_sent.get(name)
        at = self.sim.now if last is None else max(self.sim.now, last + SECOND)
        self._pending_trigger[name] = self.sim.schedule(at, self._fire_trigger, name)

    def _fire_trigger(self, name: str) -> None:
        self._pending_trigger.pop(name, None)
        iface = self.host.interfaces.get(name)
        if iface is None or iface not in self.interfaces():
            return
        self.triggered_sent += 1
        self.send_update(iface)

    # -- receiving ----------------------------------------------------------------------

    def _on_datagram(self, dgram) -> None:
        iface = self.host.interfaces.get(dgram.iface) if dgram.iface else None
        if iface is None or iface not in self.interfaces():
            return
        if dgram.src_port != RIP_PORT or dgram.src in self.host.local_addresses():
            return
        try:
            msg = RipMessage.decode(dgram.payload)
        except DecodeError:
            self.malformed += 1
            self.host.counters["rip_malformed"] += 1
            return
        if msg.command == COMMAND_REQUEST:
            self.send_update(iface)
            return
        self.sources[dgram.src] = self.sim.now
        self.process_update(iface, msg, dgram.src)

    def process_update(self, iface: Interface, msg: RipMessage, src: Ipv4Addr) -> None:
        changed = False
        local = {(i.subnet, i.mask) for i in self.host.interfaces.values() if i.up and i.ip is not None}
        now = self.sim.now
        for e in msg.entries:
            key = (e.destination, e.mask)
            if key in local:
                continue
            metric = min(e.metric + 1, INFINITY)
            cur = self.routes.get(key)
            if cur is None:
                if metric < INFINITY:
                    self.routes[key] = route = RipRoute(e.destination, e.mask, metric, src, iface.name, now)
                    self._install(route)
                    changed = True
                continue
            if cur.next_hop == src:
                if metric < INFINITY:
                    cur.updated = now
                if metric != cur.metric:
                    changed = True
                    self._set_metric(cur, metric)
            elif metric < cur.metric:
                self._uninstall(cur)
                cur.next_hop, cur.iface, cur.updated = src, iface.name, now
                cur.metric = metric
                cur.garbage_since = None
                self._install(cur)
                changed = True
        if changed:
            self._trigger_all()

    def _set_metric(self, route: RipRoute, metric: int) -> None:
        route.metric = metric
        if metric >= INFINITY:
            if route.garbage_since is None:
                route.garbage_since = self.sim.now
            self._uninstall(route)
        else:
            route.garbage_since = None
            self._uninstall(route)
            self._install(route)

    def _install(self, route: RipRoute) -> None:
        route.entry = self.host.routes.add(route.destination, route.mask, route.next_hop, route.iface,
                                           metric=route.metric, origin=Origin.RIP,
                                           interfaces=self.host.interfaces.values())

    def _uninstall(self, route: RipRoute) -> None:
        if route.entry is not None and route.entry in self.host.routes.entries:
            self.host.routes.remove(route.entry)
        route.entry = None

    # -- aging ----------------------------------------------------------------------------

    def _sweep(self) -> None:
        now = self.sim.now
        changed = False
        for key in list(self.routes):
            r = self.routes[key]
            if r.metric < INFINITY and now - r.updated > self.route_timeout:
                self._set_metric(r, INFINITY)
                changed = True
            elif r.garbage_since is not None and now - r.garbage_since > self.garbage_timeout:
                self._uninstall(r)
                del self.routes[key]
        if changed:
            self._trigger_all()
        self._sweeper = self.sim.call_later(1 * SECOND, self._sweep)

    # -- reporting ------------------------------------------------------------------------

    def metric_to(self, destination, mask: SubnetMask) -> int | None:
        key = (ip(destination), mask)
        for r in self.connected():
            if r.key == key:
                return 1
        route = self.routes.get(key)
        return route.metric if route is not None else None

    def table(self) -> list[RipRoute]:
        rows = {r.key: r for r in self.connected()}
        for key, r in self.routes.items():
            rows.setdefault(key, r)
        return [rows[k] for k in sorted(rows, key=lambda k: (int(k[0]), k[1].prefixlen))]

    def show_protocols(self) -> str:
        now = self.sim.now
        due = max((self._next_periodic or now) - now, 0) // SECOND
        lines = [
            'Routing Protocol is "rip"',
            f"  Sending updates every {self.update_interval // SECOND} seconds, next due in {due} seconds",
            f"  Invalid after {self.route_timeout // SECOND} seconds, flush after {self.garbage_timeout // SECOND} seconds",
            "  Default version control: send version 2, receive version 2",
            f"  Split horizon: {self.split_horizon.value}",
            "    Interface             Send  Recv",
        ]
        for iface in self.interfaces():
            lines.append(f"    {iface.name:<22}2     2")
        lines.append("  Routing for Networks:")
        lines += [f"    {n}" for n in self.networks]
        lines.append("  Routing Information Sources:")
        lines.append("    Gateway         Distance      Last Update")
        for src in sorted(self.sources):
            lines.append(f"    {str(src):<15} {120:>8}      {_hms((now - self.sources[src]) // SECOND)}")
        lines.append("  Distance: (default is 120)")
        return "\n".join(lines) + "\n"


def _hms(seconds: int) -> str:
    return f"{seconds // 3600:02d}:{seconds % 3600 // 60:02d}:{seconds % 60:02d}"


def rip_enable(host: Host, networks=(), **options) -> RipProcess:
    """Start (or reuse) the host's RIP process and enable ``networks`` on it."""
    proc = host.services.get("rip")
    if proc is None:
        proc = RipProcess(host, **options)
        host.services["rip"] = proc
    for net in networks:
        proc.add_network(net)
    return proc
