"""DHCP message codec, address pool server and client."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

from ..fabric.sim import SECOND
from ..hoststack.host import Host
from ..wire.addr import Ipv4Addr, MacAddr, SubnetMask, ip
from ..wire.ethernet import DecodeError
from ..wire.ipv4 import PROTO_UDP, Ipv4Packet
from ..wire.udp import UdpDatagram

SERVER_PORT = 67
CLIENT_PORT = 68
MAGIC = b"\x63\x82\x53\x63"
BOOTREQUEST, BOOTREPLY = 1, 2
DISCOVER, OFFER, REQUEST, DECLINE, ACK, NAK, RELEASE = 1, 2, 3, 4, 5, 6, 7
TYPE_NAMES = {DISCOVER: "DHCPDISCOVER", OFFER: "DHCPOFFER", REQUEST: "DHCPREQUEST",
              DECLINE: "DHCPDECLINE", ACK: "DHCPACK", NAK: "DHCPNAK", RELEASE: "DHCPRELEASE"}
OPT_MASK, OPT_ROUTER, OPT_REQUESTED, OPT_LEASE, OPT_TYPE, OPT_SERVER, OPT_END = 1, 3, 50, 51, 53, 54, 255
FLAG_BROADCAST = 0x8000
ZERO = Ipv4Addr("0.0.0.0")
BROADCAST = Ipv4Addr("255.255.255.255")
_FIXED = "!BBBBIHH4s4s4s4s16s64s128s"
_FIXED_LEN = struct.calcsize(_FIXED)
MIN_LEN = 300


@dataclass(frozen=True)
class DhcpMessage:
    op: int
    xid: int
    chaddr: MacAddr
    msg_type: int
    ciaddr: Ipv4Addr = ZERO
    yiaddr: Ipv4Addr = ZERO
    siaddr: Ipv4Addr = ZERO
    giaddr: Ipv4Addr = ZERO
    flags: int = FLAG_BROADCAST
    secs: int = 0
    hops: int = 0
    subnet_mask: SubnetMask | None = None
    router: Ipv4Addr | None = None
    lease_time: int | None = None
    server_id: Ipv4Addr | None = None
    requested_ip: Ipv4Addr | None = None

    @property
    def type_name(self) -> str:
        return TYPE_NAMES.get(self.msg_type, f"DHCP({self.msg_type})")

    def encode(self) -> bytes:
        fixed = struct.pack(_FIXED, self.op, 1, 6, self.hops, self.xid, self.secs, self.flags,
                            self.ciaddr.packed, self.yiaddr.packed, self.siaddr.packed,
                            self.giaddr.packed, bytes(self.chaddr) + bytes(10), b"", b"")
        opts = bytearray([OPT_TYPE, 1, self.msg_type])
        if self.subnet_mask is not None:
            opts += bytes([OPT_MASK, 4]) + self.subnet_mask.address.packed
        if self.router is not None:
            opts += bytes([OPT_ROUTER, 4]) + self.router.packed
        if self.lease_time is not None:
            opts += bytes([OPT_LEASE, 4]) + struct.pack("!I", self.lease_time)
        if self.server_id is not None:
            opts += bytes([OPT_SERVER, 4]) + self.server_id.packed
        if self.requested_ip is not None:
            opts += bytes([OPT_REQUESTED, 4]) + self.requested_ip.packed
        opts.append(OPT_END)
        data = fixed + MAGIC + bytes(opts)
        return data + bytes(max(MIN_LEN - len(data), 0))

    @classmethod
    def decode(cls, data: bytes) -> DhcpMessage:
        if len(data) < _FIXED_LEN + 4:
            raise DecodeError(f"DHCP message truncated ({len(data)} bytes)")
        op, htype, hlen, hops, xid, secs, flags, ci, yi, si, gi, ch, _, _ = struct.unpack_from(_FIXED, data)
        if htype != 1 or hlen != 6:
            raise DecodeError(f"unsupported hardware type {htype}/{hlen}")
        if data[_FIXED_LEN:_FIXED_LEN + 4] != MAGIC:
            raise DecodeError("missing DHCP magic cookie")
        opts: dict[int, bytes] = {}
        i = _FIXED_LEN + 4
        while i < len(data):
            code = data[i]
            if code == OPT_END:
                break
            if code == 0:
                i += 1
                continue
            if i + 1 >= len(data) or i + 2 + data[i + 1] > len(data):
                raise DecodeError("truncated DHCP option")
            size = data[i + 1]
            opts[code] = bytes(data[i + 2:i + 2 + size])
            i += 2 + size
        if OPT_TYPE not in opts or len(opts[OPT_TYPE]) != 1:
            raise DecodeError("DHCP message type option missing")

        def addr(code):
            return Ipv4Addr(opts[code][:4]) if code in opts and len(opts[code]) >= 4 else None

        mask = addr(OPT_MASK)
        return cls(op, xid, MacAddr(ch[:6]), opts[OPT_TYPE][0], Ipv4Addr(ci), Ipv4Addr(yi),
                   Ipv4Addr(si), Ipv4Addr(gi), flags, secs, hops,
                   SubnetMask.from_int(int(mask)) if mask is not None else None,
                   addr(OPT_ROUTER),
                   struct.unpack("!I", opts[OPT_LEASE][:4])[0] if len(opts.get(OPT_LEASE, b"")) >= 4 else None,
                   addr(OPT_SERVER), addr(OPT_REQUESTED))


@dataclass
class Lease:
    mac: MacAddr
    expires: int
    bound: bool


@dataclass
class DhcpPool:
    name: str
    network: Ipv4Addr | None = None
    mask: SubnetMask | None = None
    default_router: Ipv4Addr | None = None
    lease_time: int = 3600
    leases: dict[Ipv4Addr, Lease] = field(default_factory=dict)

    def contains(self, addr: Ipv4Addr) -> bool:
        return self.network is not None and int(addr) & self.mask.value == int(self.network)

    def host_range(self) -> range:
        base = int(self.network)
        size = 1 << (32 - self.mask.prefixlen)
        return range(base + 1, base + size - 1)


class DhcpServer:
    """Allocates from pools whose network matches the receiving interface."""

    OFFER_HOLD = 60 * SECOND

    def __init__(self, host: Host):
        self.host = host
        self.pools: dict[str, DhcpPool] = {}
        self.excluded: list[tuple[Ipv4Addr, Ipv4Addr]] = []
        self.enabled = True
        self.log: list[tuple[int, str, Ipv4Addr | None, MacAddr]] = []
        self.sock = host.udp.socket()
        self.sock.bind(port=SERVER_PORT)
        self.sock.on_datagram = self._on_datagram

    def pool(self, name: str) -> DhcpPool:
        return self.pools.setdefault(name, DhcpPool(name))

    def exclude(self, low, high=None) -> None:
        low = ip(low)
        self.excluded.append((low, ip(high) if high is not None else low))

    def is_excluded(self, addr: Ipv4Addr) -> bool:
        return any(lo <= addr <= hi for lo, hi in self.excluded)

    def _available(self, pool: DhcpPool, addr: Ipv4Addr, mac: MacAddr) -> bool:
        if not pool.contains(addr) or int(addr) not in pool.host_range():
            return False
        if self.is_excluded(addr) or addr in self.host.local_addresses():
            return False
        lease = pool.leases.get(addr)
        return lease is None or lease.mac == mac or lease.expires <= self.host.sim.now

    def choose(self, pool: DhcpPool, mac: MacAddr) -> Ipv4Addr | None:
        for addr, lease in sorted(pool.leases.items()):
            if lease.mac == mac and lease.expires > self.host.sim.now:
                return addr
        for value in pool.host_range():
            addr = Ipv4Addr(value)
            if self._available(pool, addr, mac):
                return addr
        return None

    def active_leases(self) -> list[tuple[Ipv4Addr, MacAddr]]:
        now = self.host.sim.now
        return [(a, l.mac) for p in self.pools.values() for a, l in sorted(p.leases.items())
                if l.bound and l.expires > now]

    def _pool_for(self, iface_name: str | None) -> tuple[DhcpPool | None, object]:
        iface = self.host.interfaces.get(iface_name) if iface_name else None
        if iface is None or iface.ip is None:
            return None, iface
        for pool in self.pools.values():
            if pool.network is not None and pool.contains(iface.ip):
                return pool, iface
        return None, iface

    def _on_datagram(self, dgram) -> None:
        if not self.enabled:
            return
        try:
            msg = DhcpMessage.decode(dgram.payload)
        except DecodeError:
            self.host.counters["dhcp_malformed"] += 1
            return
        if msg.op != BOOTREQUEST:
            return
        pool, iface = self._pool_for(dgram.iface)
        if pool is None:
            return
        now = self.host.sim.now
        if msg.msg_type == DISCOVER:
            addr = self.choose(pool, msg.chaddr)
            if addr is None:
                self.host.counters["dhcp_pool_exhausted"] += 1
                return
            if addr not in pool.leases or pool.leases[addr].mac != msg.chaddr or not pool.leases[addr].bound:
                pool.leases[addr] = Lease(msg.chaddr, now + self.OFFER_HOLD, False)
            self._reply(msg, OFFER, addr, pool, iface)
        elif msg.msg_type == REQUEST:
            if msg.server_id is not None and msg.server_id != iface.ip:
                lease = next((a for a, l in pool.leases.items() if l.mac == msg.chaddr and not l.bound), None)
                if lease is not None:
                    del pool.leases[lease]
                return
            wanted = msg.requested_ip or msg.ciaddr
            if wanted != ZERO and self._available(pool, wanted, msg.chaddr):
                pool.leases[wanted] = Lease(msg.chaddr, now + pool.lease_time * SECOND, True)
                self._reply(msg, ACK, wanted, pool, iface)
            else:
                self._reply(msg, NAK, None, pool, iface)
        elif msg.msg_type == RELEASE:
            lease = pool.leases.get(msg.ciaddr)
            if lease is not None and lease.mac == msg.chaddr:
                del pool.leases[msg.ciaddr]

    def _reply(self, req: DhcpMessage, kind: int, addr: Ipv4Addr | None, pool: DhcpPool, iface) -> None:
        if kind == NAK:
            reply = DhcpMessage(BOOTREPLY, req.xid, req.chaddr, NAK, flags=req.flags, server_id=iface.ip)
        else:
            reply = DhcpMessage(BOOTREPLY, req.xid, req.chaddr, kind, yiaddr=addr, siaddr=iface.ip,
                                flags=req.flags, subnet_mask=pool.mask, router=pool.default_router,
                                lease_time=pool.lease_time, server_id=iface.ip)
        self.log.append((self.host.sim.now, reply.type_name, addr, req.chaddr))
        self.sock.sendto(reply.encode(), BROADCAST, CLIENT_PORT, iface=iface.name)


@dataclass
class DhcpResult:
    iface: str
    address: Ipv4Addr | None = None
    mask: SubnetMask | None = None
    router: Ipv4Addr | None = None
    server: Ipv4Addr | None = None
    messages: list[str] = field(default_factory=list)

    @property
    def bound(self) -> bool:
        return self.address is not None


async def dhcp_client(host: Host, ifname: str, *, attempts: int = 3, timeout: int = 2 * SECOND) -> DhcpResult:
    """Run DISCOVER/OFFER/REQUEST/ACK on ``ifname`` and apply the lease."""
    sim = host.sim
    iface = host.iface(ifname)
    result = DhcpResult(ifname)
    rng = sim.rng(f"dhcp-xid:{host.name}:{ifname}:{sim.now}")
    xid = rng.getrandbits(32)
    sock = host.udp.socket()
    sock.bind(port=CLIENT_PORT)

    def send(msg: DhcpMessage) -> None:
        body = UdpDatagram(CLIENT_PORT, SERVER_PORT, msg.encode()).encode(ZERO, BROADCAST)
        packet = Ipv4Packet(ZERO, BROADCAST, PROTO_UDP, body, identification=host.next_ip_id())
        host.send_broadcast(ifname, packet)
        result.messages.append(msg.type_name)

    async def await_reply(kinds: tuple[int, ...]) -> DhcpMessage | None:
        deadline = sim.now + timeout
        while sim.now < deadline:
            try:
                dgram = await sock.recvfrom(deadline - sim.now)
            except TimeoutError:
                return None
            if dgram.iface != ifname:
                continue
            try:
                msg = DhcpMessage.decode(dgram.payload)
            except DecodeError:
                continue
            if msg.op == BOOTREPLY and msg.xid == xid and msg.chaddr == iface.mac and msg.msg_type in kinds:
                result.messages.append(msg.type_name)
                return msg
        return None

    try:
        offer = None
        for _ in range(attempts):
            host.print(f"DHCPDISCOVER on {ifname} to 255.255.255.255 port {SERVER_PORT}")
            send(DhcpMessage(BOOTREQUEST, xid, iface.mac, DISCOVER))
            offer = await await_reply((OFFER,))
            if offer is not None:
                break
        if offer is None:
            host.print("No DHCPOFFERS received.")
            return result
        host.print(f"DHCPOFFER of {offer.yiaddr} from {offer.server_id}")
        ack = None
        for _ in range(attempts):
            host.print(f"DHCPREQUEST for {offer.yiaddr} on {ifname} to 255.255.255.255 port {SERVER_PORT}")
            send(DhcpMessage(BOOTREQUEST, xid, iface.mac, REQUEST, requested_ip=offer.yiaddr,
                             server_id=offer.server_id))
            ack = await await_reply((ACK, NAK))
            if ack is not None:
                break
        if ack is None or ack.msg_type == NAK:
            host.print("DHCPNAK received." if ack is not None else "No DHCPACK received.")
            return result
        host.print(f"DHCPACK of {ack.yiaddr} from {ack.server_id}")
        mask = ack.subnet_mask or offer.subnet_mask
        host.ifconfig_set(ifname, ack.yiaddr, mask)
        iface.method = "dhcp"
        if ack.router is not None:
            host.set_default_gateway(ack.router)
        result.address, result.mask, result.router, result.server = ack.yiaddr, mask, ack.router, ack.server_id
        host.print(f"bound to {ack.yiaddr}")
        return result
    finally:
        sock.close()
