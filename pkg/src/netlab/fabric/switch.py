from __future__ import annotations

from dataclasses import dataclass

from ..wire.addr import MacAddr
from .link import Port
from .sim import SECOND, Simulator


@dataclass
class MacTableEntry:
    port: int
    last_seen: int


class Switch:
    """Transparent learning bridge. It owns no MAC or IP address and never
    originates a frame; it only relays what arrives."""

    def __init__(self, sim: Simulator, name: str, aging: int = 300 * SECOND):
        self.sim = sim
        self.name = name
        self.aging = aging
        self.ports: dict[int, Port] = {}
        self.mac_table: dict[MacAddr, MacTableEntry] = {}
        self.flooded = 0
        self.forwarded = 0
        self.filtered = 0

    def add_port(self, index: int) -> Port:
        if index in self.ports:
            return self.ports[index]
        port = Port(self.name, str(index), self._on_frame)
        port.index = index
        self.ports[index] = port
        self.ports = dict(sorted(self.ports.items()))
        return port

    def _on_frame(self, port: Port, frame: bytes) -> None:
        self.switch_forward(port.index, frame)

    def lookup(self, mac: MacAddr) -> int | None:
        entry = self.mac_table.get(mac)
        if entry is None:
            return None
        if self.sim.now - entry.last_seen > self.aging:
            del self.mac_table[mac]
            return None
        return entry.port

    def switch_forward(self, ingress: int, frame: bytes) -> None:
        if len(frame) < 14:
            return
        dst = MacAddr(bytes(frame[0:6]))
        src = MacAddr(bytes(frame[6:12]))
        if not src.is_multicast:
            self.mac_table[src] = MacTableEntry(ingress, self.sim.now)
        out = None if dst.is_multicast else self.lookup(dst)
        if out is None:
            self.flooded += 1
            for index, port in self.ports.items():
                if index != ingress:
                    port.transmit(frame)
        elif out == ingress:
            self.filtered += 1
        else:
            self.forwarded += 1
            self.ports[out].transmit(frame)

    def table_lines(self) -> list[str]:
        lines = ["MAC Address        Port  Age(s)"]
        for mac in sorted(self.mac_table):
            entry = self.mac_table[mac]
            age = (self.sim.now - entry.last_seen) // SECOND
            if self.sim.now - entry.last_seen <= self.aging:
                lines.append(f"{str(mac):<18} {entry.port:<5} {age}")
        return lines
