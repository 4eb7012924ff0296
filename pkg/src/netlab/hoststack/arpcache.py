"""ARP resolution engine and neighbour cache."""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from ..fabric.sim import SECOND, Event
from ..wire.addr import BROADCAST_MAC, ZERO_MAC, Ipv4Addr, MacAddr, ip
from ..wire.arp import ARP_REPLY, ARP_REQUEST, ArpMessage
from ..wire.ethernet import ETHERTYPE_ARP, ETHERTYPE_IPV4
from ..wire.ipv4 import Ipv4Packet

if TYPE_CHECKING:
    from .host import Host
    from .interface import Interface

REACHABLE_TIME = 60 * SECOND
RETRY_INTERVAL = 1 * SECOND
MAX_ATTEMPTS = 3
QUEUE_LEN = 3
UNSPECIFIED = Ipv4Addr("0.0.0.0")


class ArpState(enum.Enum):
    INCOMPLETE = "INCOMPLETE"
    REACHABLE = "REACHABLE"


@dataclass
class ArpEntry:
    ip: Ipv4Addr
    mac: MacAddr | None
    iface: str
    state: ArpState
    permanent: bool = False
    expires: int | None = None
    # (packet, forwarded) pairs awaiting resolution
    pending: deque = field(default_factory=lambda: deque(maxlen=QUEUE_LEN))
    attempts: int = 0
    timer: Event | None = None


class ArpCache:
    def __init__(self, host: Host, *, reachable_time: int = REACHABLE_TIME,
                 retry_interval: int = RETRY_INTERVAL, max_attempts: int = MAX_ATTEMPTS):
        self.host = host
        self.reachable_time = reachable_time
        self.retry_interval = retry_interval
        self.max_attempts = max_attempts
        self.entries: dict[Ipv4Addr, ArpEntry] = {}
        self.requests_sent = 0
        self.replies_sent = 0
        self.failures = 0
        self.queue_overflows = 0

    @property
    def now(self) -> int:
        return self.host.sim.now

    def _live(self, addr: Ipv4Addr) -> ArpEntry | None:
        entry = self.entries.get(addr)
        if entry is None:
            return None
        if (entry.state is ArpState.REACHABLE and not entry.permanent
                and entry.expires is not None and self.now >= entry.expires):
            del self.entries[addr]
            return None
        return entry

    # -- resolution ---------------------------------------------------------

    def resolve(self, iface: Interface, target: Ipv4Addr, packet: Ipv4Packet | None = None,
                forwarded: bool = False) -> MacAddr | None:
        """Return the MAC for ``target`` or queue ``packet`` and start resolving."""
        entry = self._live(target)
        if entry is not None and entry.state is ArpState.REACHABLE:
            if not entry.permanent:
                entry.expires = self.now + self.reachable_time
            return entry.mac
        if entry is None:
            entry = ArpEntry(target, None, iface.name, ArpState.INCOMPLETE)
            self.entries[target] = entry
            self._enqueue(entry, packet, forwarded)
            self._send_request(entry)
        else:
            self._enqueue(entry, packet, forwarded)
        return None

    def _enqueue(self, entry: ArpEntry, packet: Ipv4Packet | None, forwarded: bool) -> None:
        if packet is None:
            return
        if len(entry.pending) == entry.pending.maxlen:
            self.queue_overflows += 1
        entry.pending.append((packet, forwarded))

    def _send_request(self, entry: ArpEntry) -> None:
        iface = self.host.interfaces[entry.iface]
        entry.attempts += 1
        msg = ArpMessage(ARP_REQUEST, iface.mac, iface.ip, ZERO_MAC, entry.ip)
        self.requests_sent += 1
        self.host.send_frame(iface, BROADCAST_MAC, ETHERTYPE_ARP, msg.encode())
        entry.timer = self.host.sim.call_later(self.retry_interval, self._retry, entry)

    def _retry(self, entry: ArpEntry) -> None:
        if self.entries.get(entry.ip) is not entry or entry.state is not ArpState.INCOMPLETE:
            return
        if entry.attempts < self.max_attempts:
            self._send_request(entry)
            return
        del self.entries[entry.ip]
        self.failures += 1
        for packet, forwarded in entry.pending:
            self.host.resolution_failed(packet, forwarded)

    # -- input --------------------------------------------------------------

    def input(self, iface: Interface, msg: ArpMessage) -> None:
        if msg.spa != UNSPECIFIED:
            entry = self._live(msg.spa)
            if entry is not None:
                if not entry.permanent:
                    self._confirm(entry, msg.sha, iface)
            elif msg.oper == ARP_REQUEST and iface.ip is not None and msg.tpa == iface.ip:
                entry = ArpEntry(msg.spa, msg.sha, iface.name, ArpState.REACHABLE,
                                 expires=self.now + self.reachable_time)
                self.entries[msg.spa] = entry
        if msg.oper == ARP_REQUEST and iface.ip is not None and msg.tpa == iface.ip:
            reply = ArpMessage(ARP_REPLY, iface.mac, iface.ip, msg.sha, msg.spa)
            self.replies_sent += 1
            self.host.send_frame(iface, msg.sha, ETHERTYPE_ARP, reply.encode())

    def _confirm(self, entry: ArpEntry, mac: MacAddr, iface: Interface) -> None:
        was_incomplete = entry.state is ArpState.INCOMPLETE
        entry.mac = mac
        entry.iface = iface.name
        entry.state = ArpState.REACHABLE
        entry.expires = self.now + self.reachable_time
        if entry.timer is not None:
            entry.timer.cancel()
            entry.timer = None
        if was_incomplete:
            queued = list(entry.pending)
            entry.pending.clear()
            for packet, _ in queued:
                self.host.send_frame(iface, mac, ETHERTYPE_IPV4, packet.encode(keep_checksum=True))

    # -- administration -----------------------------------------------------

    def add_static(self, addr, mac, iface: str | None = None) -> ArpEntry:
        addr = ip(addr)
        mac = mac if isinstance(mac, MacAddr) else MacAddr.parse(mac)
        if iface is None:
            iface = self.host.iface_for_neighbor(addr)
        old = self.entries.get(addr)
        if old is not None and old.timer is not None:
            old.timer.cancel()
        entry = ArpEntry(addr, mac, iface, ArpState.REACHABLE, permanent=True)
        self.entries[addr] = entry
        return entry

    def delete(self, addr) -> bool:
        addr = ip(addr)
        entry = self.entries.pop(addr, None)
        if entry is None:
            self.host.notice(f"arp: {addr}: no entry")
            return False
        if entry.timer is not None:
            entry.timer.cancel()
        return True

    def flush(self, include_permanent: bool = False) -> None:
        for addr in list(self.entries):
            entry = self.entries[addr]
            if entry.permanent and not include_permanent:
                continue
            if entry.timer is not None:
                entry.timer.cancel()
            del self.entries[addr]

    def list(self) -> list[ArpEntry]:
        for addr in list(self.entries):
            self._live(addr)
        return [self.entries[a] for a in sorted(self.entries)]

    def lookup(self, addr) -> MacAddr | None:
        entry = self._live(ip(addr))
        if entry is None or entry.state is not ArpState.REACHABLE:
            return None
        return entry.mac

    def render(self) -> str:
        lines = [f"{'Address':<16}{'HWaddress':<19}{'State':<12}{'Flags':<6}Iface"]
        for e in self.list():
            mac = str(e.mac) if e.mac is not None else "(incomplete)"
            flags = "PERM" if e.permanent else "-"
            lines.append(f"{str(e.ip):<16}{mac:<19}{e.state.value:<12}{flags:<6}{e.iface}")
        return "\n".join(lines) + "\n"
