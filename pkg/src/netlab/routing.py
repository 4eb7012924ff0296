"""Static routing table with ``route``-command semantics and LPM lookup."""

from __future__ import annotations

import enum
import itertools
import logging
from dataclasses import dataclass
from typing import Callable, Iterable

from .wire.addr import Ipv4Addr, SubnetMask, ip, same_subnet

log = logging.getLogger(__name__)

DEFAULT_DEST = Ipv4Addr("0.0.0.0")


class Origin(enum.Enum):
    CONNECTED = "C"
    STATIC = "S"
    RIP = "R"


class RouteError(ValueError):
    pass


class NetworkUnreachable(RouteError):
    pass


@dataclass
class RouteEntry:
    destination: Ipv4Addr
    mask: SubnetMask
    gateway: Ipv4Addr | None
    iface: str
    metric: int = 0
    origin: Origin = Origin.STATIC
    seq: int = 0

    @property
    def flags(self) -> str:
        return "U" + ("G" if self.gateway is not None else "") + ("H" if self.mask.prefixlen == 32 else "")

    @property
    def is_default(self) -> bool:
        return self.mask.prefixlen == 0

    def matches(self, dst: Ipv4Addr) -> bool:
        return int(dst) & self.mask.value == int(self.destination)

    def key(self) -> tuple:
        return (self.destination, self.mask, self.gateway, self.iface)


class RoutingTable:
    def __init__(self, notice: Callable[[str], None] | None = None):
        self.entries: list[RouteEntry] = []
        self._seq = itertools.count()
        self.notice = notice or log.info

    def __iter__(self):
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def add(self, destination, mask: SubnetMask, gateway=None, iface: str | None = None, *,
            metric: int = 0, origin: Origin = Origin.STATIC, interfaces: Iterable = ()) -> RouteEntry:
        """Append a route. ``interfaces`` are objects with name/ip/mask/up used
        to check that a gateway is on-link and to pick the outgoing interface."""
        destination = ip(destination)
        normalized = Ipv4Addr(int(destination) & mask.value)
        if normalized != destination:
            self.notice(f"route: destination {destination} has bits outside mask {mask}; using {normalized}")
            destination = normalized
        gw = ip(gateway) if gateway is not None else None
        if gw is not None:
            onlink = [i for i in interfaces
                      if i.up and i.ip is not None and same_subnet(gw, i.ip, i.mask)
                      and (iface is None or i.name == iface)]
            if not onlink:
                raise RouteError(f"SIOCADDRT: gateway {gw} is not reachable on any up interface")
            iface = onlink[0].name
        if iface is None:
            raise RouteError("route needs a gateway or an interface")
        entry = RouteEntry(destination, mask, gw, iface, metric, origin, next(self._seq))
        if any(e.key() == entry.key() for e in self.entries):
            raise RouteError(f"SIOCADDRT: route {destination}/{mask.prefixlen} via {gw or iface} exists")
        self.entries.append(entry)
        return entry

    def delete(self, destination=None, mask: SubnetMask | None = None, gateway=None,
               iface: str | None = None, origin: Origin | None = None) -> RouteEntry | None:
        """Remove the first entry (insertion order) matching every given field."""
        for entry in self.entries:
            if destination is not None and entry.destination != ip(destination):
                continue
            if mask is not None and entry.mask != mask:
                continue
            if gateway is not None and entry.gateway != ip(gateway):
                continue
            if iface is not None and entry.iface != iface:
                continue
            if origin is not None and entry.origin is not origin:
                continue
            self.entries.remove(entry)
            return entry
        self.notice("SIOCDELRT: No such process")
        return None

    def remove(self, entry: RouteEntry) -> None:
        self.entries.remove(entry)

    def flush(self, origin: Origin | None = None) -> None:
        self.entries = [e for e in self.entries if origin is not None and e.origin is not origin]

    def lookup(self, dst) -> RouteEntry:
        """Longest prefix wins; ties go to the lower metric, then the older entry."""
        dst = ip(dst)
        best = None
        for entry in self.entries:
            if not entry.matches(dst):
                continue
            if best is None or (-entry.mask.prefixlen, entry.metric, entry.seq) < \
                    (-best.mask.prefixlen, best.metric, best.seq):
                best = entry
        if best is None:
            raise NetworkUnreachable(f"connect: Network is unreachable ({dst})")
        return best

    def next_hop(self, dst) -> tuple[str, Ipv4Addr]:
        entry = self.lookup(dst)
        return entry.iface, entry.gateway if entry.gateway is not None else ip(dst)

    def render(self) -> str:
        """``route -n`` style text, longest prefixes first."""
        lines = [f"{'Destination':<16}{'Gateway':<16}{'Genmask':<16}{'Flags':<6}{'Metric':<7}Iface"]
        for e in sorted(self.entries, key=lambda e: (-e.mask.prefixlen, e.seq)):
            gw = str(e.gateway) if e.gateway is not None else "0.0.0.0"
            lines.append(f"{str(e.destination):<16}{gw:<16}{str(e.mask):<16}{e.flags:<6}{e.metric:<7}{e.iface}")
        return "\n".join(lines) + "\n"

