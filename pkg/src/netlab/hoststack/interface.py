from __future__ import annotations

from dataclasses import dataclass

from ..fabric.link import Port
from ..wire.addr import Ipv4Addr, MacAddr, SubnetMask, broadcast_of, subnet_of

MIN_MTU = 68


@dataclass
class Interface:
    name: str
    mac: MacAddr
    port: Port
    ip: Ipv4Addr | None = None
    mask: SubnetMask | None = None
    mtu: int = 1500
    up: bool = True
    promiscuous: bool = True
    method: str = "unset"

    @property
    def subnet(self) -> Ipv4Addr | None:
        if self.ip is None:
            return None
        return subnet_of(self.ip, self.mask)

    @property
    def broadcast(self) -> Ipv4Addr | None:
        if self.ip is None:
            return None
        return broadcast_of(self.ip, self.mask)

    def on_link(self, addr: Ipv4Addr) -> bool:
        return self.ip is not None and int(addr) & self.mask.value == int(self.subnet)

    def describe(self) -> str:
        state = "UP" if self.up else "DOWN"
        lines = [f"{self.name}: flags=<{state},BROADCAST{',PROMISC' if self.promiscuous else ''}>  mtu {self.mtu}"]
        if self.ip is not None:
            lines.append(f"        inet {self.ip}  netmask {self.mask}  broadcast {self.broadcast}")
        lines.append(f"        ether {self.mac}")
        return "\n".join(lines)
